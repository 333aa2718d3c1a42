//! Series mechanization of the free-boundary expansions.
//!
//! Everything is computed in the scaled frame `t = a0^{1/3} lambda^{1/3}`
//! with `a0 = (3/4)(1-theta)^2/theta^4`: in that variable every coefficient
//! is a rational function of `theta` and `delta/sigma^2`, so the exact
//! coefficient mode stays exact all the way through cube roots and
//! reversion.

use crate::series::{solve_implicit, BivariateSeries, PuiseuxSeries, Scalar, SeriesError};

/// Variable tags used by the expansion pipeline.
pub const U_BASE: &str = "c-cbar";
pub const T_BASE: &str = "t";
pub const T_JS_BASE: &str = "t_js";
pub const EPS_BASE: &str = "lambda^(1/3)";
pub const EPS_JS_BASE: &str = "lambda_check^(1/3)";

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("series arithmetic failed: {0}")]
    Series(#[from] SeriesError),
    #[error("divided series has degenerate linear coefficient b10 = 0")]
    DegenerateB10,
    #[error("endowment does not start on the Merton line (pi0 = {pi0}, theta = {theta})")]
    EndowmentOffMertonLine { pi0: f64, theta: f64 },
}

/// Taylor coefficients of `g(s, c)` around `(1, cbar)` with
/// `g(1, c) = g_s(1, c) = 1`, by Picard iteration on the integral form of
/// the ODE. Variables: `x = s - 1`, `u = c - cbar`.
pub fn taylor_g_series<C: Scalar>(
    theta: &C,
    dos2: &C,
    order_x: usize,
    order_u: usize,
) -> Result<BivariateSeries<C>, EngineError> {
    let (ox, ou) = (order_x, order_u);
    let one = BivariateSeries::constant(C::one(), ox, ou);
    let x = BivariateSeries::var_x(ox, ou);
    let cbar = (C::one() - theta.clone()) / theta.clone();
    let c = BivariateSeries::var_y(ox, ou).add_constant(&cbar);
    let s = one.add(&x);
    let s_inv = s.inverse()?;
    let s2_inv = s_inv.mul(&s_inv);
    let c_inv = c.inverse()?;
    let two = C::from_ratio(2, 1);
    let two_theta = two.clone() * theta.clone();
    let two_d = two.clone() * dos2.clone();

    let mut g = one.add(&x);
    for _ in 0..=(ox + 1) {
        let gp = g.derivative_x();
        let cg_inv = c.add(&g).inverse()?;
        let t1 = gp.mul(&gp).mul(&cg_inv).scale(&two);
        let t2 = gp.mul(&s_inv).scale(&two_theta);
        let t3 = one
            .add(&g.mul(&c_inv))
            .mul(&g.mul(&s2_inv).sub(&gp.mul(&s_inv)))
            .scale(&two_d);
        let rhs = t1.sub(&t2).add(&t3);
        g = one.add(&x).add(&rhs.integrate_x(ox).integrate_x(ox));
    }
    Ok(g)
}

/// Shared intermediates of the expansion pipeline for one parameter pair.
pub struct ExpansionEngine<C: Scalar> {
    theta: C,
    cbar: C,
    a0: C,
    order: usize,
    g: BivariateSeries<C>,
    divided: BivariateSeries<C>,
    h_tilde: PuiseuxSeries<C>,
    u_of_t: PuiseuxSeries<C>,
    c_t: PuiseuxSeries<C>,
    sbar_t: PuiseuxSeries<C>,
    theta_lower_t: PuiseuxSeries<C>,
    theta_upper_t: PuiseuxSeries<C>,
    gap_t: PuiseuxSeries<C>,
}

impl<C: Scalar> ExpansionEngine<C> {
    /// Build the pipeline at truncation order `order` in
    /// `eps = lambda^{1/3}`. Internal orders: `order + 3` in `s - 1`,
    /// `order + 1` in `c - cbar`, `order + 2` for univariate work.
    pub fn build(theta: C, dos2: C, order: usize) -> Result<Self, EngineError> {
        let k = order;
        let order_x = k + 3;
        let order_u = k + 1;
        let ku = k + 2;
        let cbar = (C::one() - theta.clone()) / theta.clone();

        let g = taylor_g_series(&theta, &dos2, order_x, order_u)?;

        // divided series: (g - s g_s)/(s - 1)
        let one = BivariateSeries::constant(C::one(), order_x, order_u);
        let s = one.add(&BivariateSeries::var_x(order_x, order_u));
        let gp = g.derivative_x();
        let divided = g.sub(&s.mul(&gp)).shift_down_x(1)?;
        if divided.coeff(1, 0).is_zero() {
            return Err(EngineError::DegenerateB10);
        }

        // x = h_tilde(u) zeroing the divided series; padded one u-order past
        // order_u (the extra slot cancels out of every output up to t^k)
        let mut padded = BivariateSeries::zero(ku, divided.order_x());
        for i in 0..=divided.order_x() {
            for j in 0..=divided.order_y() {
                padded.set_coeff(j, i, divided.coeff(i, j));
            }
        }
        let h_tilde = solve_implicit(&padded, U_BASE)?;

        // lambda(u) = (1 + h_tilde - g(1 + h_tilde, u)) / (1 + h_tilde)
        //           = u^3 / A(u)
        let one_u = PuiseuxSeries::constant(U_BASE, C::one(), ku);
        let g_at_h = g.compose_x(&h_tilde)?;
        let k_ser = one_u.add(&h_tilde)?.sub(&g_at_h)?;
        let k_div = k_ser.shift_down(3)?;
        let a = one_u.add(&h_tilde)?.truncate(k_div.order()).mul(&k_div.inverse()?)?;
        let a0 = a.coeff(0);
        let a_norm = a.scale(&(C::one() / a0.clone()));

        // t(u) = u / (A/a0)^{1/3}; its reversion gives u(t)
        let t_of_u = a_norm.pow_frac(-1, 3)?.pad(k).shift_up(1);
        let u_of_t = t_of_u.reversion()?.map(T_BASE, |_, c| c.clone());

        let c_t = u_of_t.add_constant(&cbar);
        let sbar_t = h_tilde.compose(&u_of_t)?.add_constant(&C::one());
        let theta_lower_t = c_t.add_constant(&C::one()).inverse()?;
        let theta_upper_t = c_t.mul(&sbar_t.inverse()?)?.add_constant(&C::one()).inverse()?;
        let gap_t = theta_upper_t.sub(&theta_lower_t)?;

        Ok(Self {
            theta,
            cbar,
            a0,
            order: k,
            g,
            divided,
            h_tilde,
            u_of_t,
            c_t,
            sbar_t,
            theta_lower_t,
            theta_upper_t,
            gap_t,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn theta(&self) -> &C {
        &self.theta
    }

    pub fn cbar(&self) -> &C {
        &self.cbar
    }

    /// `a0 = (3/4)(1-theta)^2/theta^4`, the cube of the frame scale.
    pub fn a0(&self) -> &C {
        &self.a0
    }

    pub fn g_series(&self) -> &BivariateSeries<C> {
        &self.g
    }

    /// Coefficients `b_ij` of `(g - s g_s)/(s-1)`.
    pub fn divided_series(&self) -> &BivariateSeries<C> {
        &self.divided
    }

    /// `H(c) - 1` as a series in `u = c - cbar`.
    pub fn h_tilde(&self) -> &PuiseuxSeries<C> {
        &self.h_tilde
    }

    pub fn u_of_t(&self) -> &PuiseuxSeries<C> {
        &self.u_of_t
    }

    /// Series in the scaled frame `t = a0^{1/3} eps`.
    pub fn c_t(&self) -> &PuiseuxSeries<C> {
        &self.c_t
    }

    pub fn sbar_t(&self) -> &PuiseuxSeries<C> {
        &self.sbar_t
    }

    pub fn theta_lower_t(&self) -> &PuiseuxSeries<C> {
        &self.theta_lower_t
    }

    pub fn theta_upper_t(&self) -> &PuiseuxSeries<C> {
        &self.theta_upper_t
    }

    pub fn gap_t(&self) -> &PuiseuxSeries<C> {
        &self.gap_t
    }

    /// `lambda` as a series in the scaled frame: `t^3 / a0`.
    pub fn lambda_t(&self) -> PuiseuxSeries<C> {
        let mut s = PuiseuxSeries::zero(T_BASE, self.u_of_t.order());
        s = s.pad(self.u_of_t.order());
        let mut coeffs = s.coeffs().to_vec();
        coeffs[3] = C::one() / self.a0.clone();
        PuiseuxSeries::new(T_BASE, coeffs)
    }

    /// Substitution `t(t_js) = t_js (1 + t_js^3/(2 a0))^{-1/3}` that re-expands
    /// a scaled series in the symmetric-spread frame
    /// `t_js = (2 a0)^{1/3} lambda_check^{1/3}`.
    fn t_of_t_js(&self) -> Result<PuiseuxSeries<C>, EngineError> {
        let k = self.u_of_t.order();
        let mut corr = PuiseuxSeries::constant(T_JS_BASE, C::one(), k);
        if k >= 3 {
            let mut coeffs = corr.coeffs().to_vec();
            coeffs[3] = C::one() / (C::from_ratio(2, 1) * self.a0.clone());
            corr = PuiseuxSeries::new(T_JS_BASE, coeffs);
        }
        Ok(corr.pow_frac(-1, 3)?.pad(k).shift_up(1))
    }

    /// No-trade boundaries re-expanded in the symmetric-spread convention,
    /// still in the scaled frame (scale `(2 a0)^{1/3}`).
    pub fn js_boundaries_t(&self) -> Result<(PuiseuxSeries<C>, PuiseuxSeries<C>), EngineError> {
        let sub = self.t_of_t_js()?;
        Ok((
            self.theta_lower_t.compose(&sub)?,
            self.theta_upper_t.compose(&sub)?,
        ))
    }

    /// Residual of the defining equation `lambda s_bar - (s_bar - g(s_bar, c))`
    /// as a series in `t`; identically zero up to truncation for a correct
    /// pipeline.
    pub fn defining_equation_residual(&self) -> Result<PuiseuxSeries<C>, EngineError> {
        let bx = self.sbar_t.add_constant(&-C::one());
        let g_at = self.g.compose_xy(&bx, &self.u_of_t)?;
        let lam = self.lambda_t();
        let lhs = lam.mul(&self.sbar_t)?;
        Ok(lhs.sub(&self.sbar_t.sub(&g_at)?)?.truncate(self.order))
    }

    /// Residuals of the two boundary conditions at `s_bar`:
    /// `g(s_bar) - (1-lambda) s_bar` and `g_s(s_bar) - (1-lambda)`.
    pub fn boundary_condition_residuals(
        &self,
    ) -> Result<(PuiseuxSeries<C>, PuiseuxSeries<C>), EngineError> {
        let bx = self.sbar_t.add_constant(&-C::one());
        let lam = self.lambda_t();
        let one_minus_lam = lam.neg().add_constant(&C::one());
        let g_at = self.g.compose_xy(&bx, &self.u_of_t)?;
        let value_res = g_at.sub(&one_minus_lam.mul(&self.sbar_t)?)?.truncate(self.order);
        let gp_at = self.g.derivative_x().compose_xy(&bx, &self.u_of_t)?;
        let deriv_res = gp_at.sub(&one_minus_lam)?.truncate(self.order);
        Ok((value_res, deriv_res))
    }

    /// Convert a scaled-frame series to `eps = lambda^{1/3}` with `f64`
    /// coefficients: coefficient `k` picks up `a0^{k/3}`.
    pub fn to_eps(&self, series_t: &PuiseuxSeries<C>, base: &str, scale_cubed: &C) -> PuiseuxSeries<f64> {
        let rho = scale_cubed.to_f64().cbrt();
        let mut pow = 1.0;
        let powers: Vec<f64> = (0..=series_t.order())
            .map(|_| {
                let p = pow;
                pow *= rho;
                p
            })
            .collect();
        series_t
            .map(base, |k, c| c.to_f64() * powers[k])
            .truncate(self.order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Rational;
    use approx::assert_relative_eq;

    fn rat(num: i64, den: i64) -> Rational {
        <Rational as Scalar>::from_ratio(num, den)
    }

    fn reference_engine() -> ExpansionEngine<Rational> {
        ExpansionEngine::build(rat(1, 2), rat(5, 8), 6).unwrap()
    }

    #[test]
    fn taylor_g_base_coefficients_exact() {
        // a_{0j} = a_{1j} = Kronecker delta; a20 = 0; a30 = theta(1-theta)/3
        let g = taylor_g_series(&rat(1, 2), &rat(5, 8), 9, 7).unwrap();
        assert_eq!(g.coeff(0, 0), rat(1, 1));
        assert_eq!(g.coeff(1, 0), rat(1, 1));
        for j in 1..=7 {
            assert_eq!(g.coeff(0, j), rat(0, 1), "a0{j}");
            assert_eq!(g.coeff(1, j), rat(0, 1), "a1{j}");
        }
        assert_eq!(g.coeff(2, 0), rat(0, 1));
        assert_eq!(g.coeff(3, 0), rat(1, 12));
    }

    #[test]
    fn taylor_g_matches_ode_rhs_derivatives() {
        // numeric cross-check: 2 a20(u) must match the ODE right-hand side
        // at (1,1,1) as a function of c
        let g = taylor_g_series(&0.5f64, &0.625f64, 8, 6).unwrap();
        let p = crate::model::ModelParams::new(0.08, 0.4, 0.1, 0.01).unwrap();
        for du in [0.0, 0.05, -0.03, 0.1] {
            let c = 1.0 + du;
            let rhs = crate::freeboundary::ode_rhs(1.0, 1.0, 1.0, c, &p);
            let mut a2 = 0.0;
            for j in (0..=6).rev() {
                a2 = a2 * du + g.coeff(2, j);
            }
            assert_relative_eq!(2.0 * a2, rhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn divided_series_signature() {
        let eng = reference_engine();
        // b00 = 0, b10 = theta(theta - 1) = -1/4
        assert_eq!(eng.divided_series().coeff(0, 0), rat(0, 1));
        assert_eq!(eng.divided_series().coeff(1, 0), rat(-1, 4));
    }

    #[test]
    fn h_linear_coefficient() {
        let eng = reference_engine();
        // d1 = 2 theta/(1-theta) = 2
        assert_eq!(eng.h_tilde().coeff(1), rat(2, 1));
        assert_eq!(eng.h_tilde().coeff(0), rat(0, 1));
    }

    #[test]
    fn a0_exact() {
        let eng = reference_engine();
        assert_eq!(eng.a0().clone(), rat(3, 1));
    }

    #[test]
    fn scaled_frame_series_exact_through_order_six() {
        // frozen with an independent exact-rational implementation of the
        // same construction
        let eng = reference_engine();
        let expect_c = [rat(1, 1), rat(1, 1), rat(4, 3), rat(187, 180), rat(787, 1080), rat(34933, 56700), rat(234877, 453600)];
        let expect_s = [rat(1, 1), rat(2, 1), rat(2, 1), rat(157, 90), rat(8, 5), rat(84881, 56700), rat(52319, 37800)];
        let expect_lo = [rat(1, 2), rat(-1, 4), rat(-5, 24), rat(1, 90), rat(35, 432), rat(-299, 113400), rat(-635, 18144)];
        let expect_hi = [rat(1, 2), rat(1, 4), rat(-5, 24), rat(13, 180), rat(47, 432), rat(-14627, 226800), rat(899, 90720)];
        let expect_gap = [rat(0, 1), rat(1, 2), rat(0, 1), rat(11, 180), rat(1, 36), rat(-14029, 226800), rat(97, 2160)];
        for k in 0..=6 {
            assert_eq!(eng.c_t().coeff(k), expect_c[k], "c t^{k}");
            assert_eq!(eng.sbar_t().coeff(k), expect_s[k], "sbar t^{k}");
            assert_eq!(eng.theta_lower_t().coeff(k), expect_lo[k], "lo t^{k}");
            assert_eq!(eng.theta_upper_t().coeff(k), expect_hi[k], "hi t^{k}");
            assert_eq!(eng.gap_t().coeff(k), expect_gap[k], "gap t^{k}");
        }
    }

    #[test]
    fn js_frame_exact() {
        let eng = reference_engine();
        let (lo, hi) = eng.js_boundaries_t().unwrap();
        // q1 = -theta^2, q2 = -2 theta^2 d / (3 (1-theta)); unchanged through
        // t^3, first difference at t^4
        assert_eq!(lo.coeff(1), rat(-1, 4));
        assert_eq!(lo.coeff(2), rat(-5, 24));
        assert_eq!(lo.coeff(3), rat(1, 90));
        assert_eq!(lo.coeff(4), rat(41, 432));
        assert_eq!(hi.coeff(1), rat(1, 4));
        assert_eq!(hi.coeff(2), rat(-5, 24));
    }

    #[test]
    fn defining_equation_is_exactly_zero() {
        let eng = reference_engine();
        let res = eng.defining_equation_residual().unwrap();
        for k in 0..=res.order() {
            assert_eq!(res.coeff(k), rat(0, 1), "t^{k}");
        }
    }

    #[test]
    fn boundary_conditions_are_exactly_zero() {
        let eng = reference_engine();
        let (v, d) = eng.boundary_condition_residuals().unwrap();
        for k in 0..=v.order() {
            assert_eq!(v.coeff(k), rat(0, 1), "value residual t^{k}");
        }
        for k in 0..=d.order() {
            assert_eq!(d.coeff(k), rat(0, 1), "derivative residual t^{k}");
        }
    }

    #[test]
    fn f64_engine_matches_rational_engine() {
        let exact = reference_engine();
        let float = ExpansionEngine::build(0.5f64, 0.625f64, 6).unwrap();
        for k in 0..=6 {
            assert_relative_eq!(
                float.c_t().coeff(k),
                exact.c_t().coeff(k).to_f64(),
                epsilon = 1e-12
            );
            assert_relative_eq!(
                float.gap_t().coeff(k),
                exact.gap_t().coeff(k).to_f64(),
                epsilon = 1e-12
            );
        }
    }
}
