//! Expansion of the value function for a start on the Merton line, by
//! mechanizing the superposition structure of the value ODE: the solution
//! with free initial level splits as `w_p + xi * w_h`, and the Neumann
//! condition at `s_bar(c)` pins `xi(c)` as a series.

use super::engine::{EngineError, ExpansionEngine, EPS_BASE, U_BASE};
use crate::model::{Endowment, ModelParams};
use crate::series::{BivariateSeries, PuiseuxSeries};
use crate::valuefn::w1_limit;

/// Bivariate Picard solve of the value ODE written as
/// `w'' = [delta w - (mu + delta(1+g/c)) s w' - inhom(s)] * 2/(sigma^2 s^2)`
/// with `w(1) = w0`, `w'(1) = 0`. The homogeneous variant drops `inhom`.
fn picard_w(
    params: &ModelParams,
    g: &BivariateSeries<f64>,
    w0: f64,
    homogeneous: bool,
    order_x: usize,
    order_u: usize,
) -> Result<BivariateSeries<f64>, EngineError> {
    let (ox, ou) = (order_x, order_u);
    let one = BivariateSeries::constant(1.0, ox, ou);
    let x = BivariateSeries::var_x(ox, ou);
    let cbar = params.c_bar();
    let c = BivariateSeries::var_y(ox, ou).add_constant(&cbar);
    let s = one.add(&x);
    let s2_inv = s.inverse()?.mul(&s.inverse()?);
    let c_inv = c.inverse()?;
    let cg_inv = c.add(g).inverse()?;
    let gp = g.derivative_x();
    let sigma2 = params.sigma * params.sigma;
    let delta = params.delta;

    // inhomogeneity: sigma^2 s^2 g'^2/(2 delta (c+g)^2) + log(delta) - 1
    let inhom = s
        .mul(&s)
        .mul(&gp.mul(&gp))
        .mul(&cg_inv.mul(&cg_inv))
        .scale(&(sigma2 / (2.0 * delta)))
        .add_constant(&(delta.ln() - 1.0));
    let drift = one
        .add(&g.mul(&c_inv))
        .scale(&delta)
        .add_constant(&params.mu)
        .mul(&s);

    let mut w = BivariateSeries::constant(w0, ox, ou);
    for _ in 0..=(ox + 1) {
        let wp = w.derivative_x();
        let mut rhs = w.scale(&delta).sub(&drift.mul(&wp));
        if !homogeneous {
            rhs = rhs.sub(&inhom);
        }
        let rhs = rhs.mul(&s2_inv).scale(&(2.0 / sigma2));
        w = BivariateSeries::constant(w0, ox, ou).add(&rhs.integrate_x(ox).integrate_x(ox));
    }
    Ok(w)
}

/// Series of the value on the Merton line in `eps = lambda^{1/3}`.
pub fn expand_value_series(
    order: usize,
    params: &ModelParams,
    endowment: &Endowment,
) -> Result<PuiseuxSeries<f64>, EngineError> {
    let theta = params.theta();
    let pi0 = endowment.pi0();
    if (pi0 - theta).abs() > 1e-9 * theta.max(1e-9) {
        return Err(EngineError::EndowmentOffMertonLine { pi0, theta });
    }
    let engine = ExpansionEngine::build(theta, params.delta_over_sigma2(), order)?;
    let order_x = order + 3;
    let order_u = order + 1;
    let ku = order + 2;

    let g = engine.g_series();
    let w1 = w1_limit(params);
    let w_p = picard_w(params, g, w1, false, order_x, order_u)?;
    let w_h = picard_w(params, g, 1.0, true, order_x, order_u)?;

    // Neumann condition at s_bar(c): xi(c) = -w_p'(H(c),c) / w_h'(H(c),c),
    // both sides vanishing linearly in u
    let dwp = w_p.derivative_x().compose_x(engine.h_tilde())?;
    let dwh = w_h.derivative_x().compose_x(engine.h_tilde())?;
    let xi = dwp
        .shift_down(1)?
        .mul(&dwh.shift_down(1)?.inverse()?)?
        .neg();

    // Merton-line start: y = c/cbar, so x_y = u/cbar
    let cbar = params.c_bar();
    let x_y = PuiseuxSeries::variable(U_BASE, ku).scale(&(1.0 / cbar));
    let w_at = w_p
        .compose_x(&x_y)?
        .add(&xi.truncate(x_y.order()).mul(&w_h.compose_x(&x_y)?)?)?;

    // wealth re-pricing at the shadow start:
    // (1/delta) log(1 + theta (g(y)/y - 1)), expanded with log(1+z)
    let g_y = g.compose_x(&x_y)?;
    let y = x_y.add_constant(&1.0);
    let z = g_y.mul(&y.inverse()?)?.add_constant(&-1.0).scale(&theta);
    let mut log1p = PuiseuxSeries::zero(U_BASE, ku);
    let mut z_pow = PuiseuxSeries::constant(U_BASE, 1.0, ku);
    for k in 1..=ku {
        z_pow = z_pow.mul(&z)?;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        log1p = log1p.add(&z_pow.scale(&(sign / k as f64)))?;
    }

    let value_u = w_at
        .add(&log1p.scale(&(1.0 / params.delta)))?
        .add_constant(&(endowment.wealth_at_ask().ln() / params.delta));
    let value_t = value_u.compose(engine.u_of_t())?;
    Ok(engine.to_eps(&value_t, EPS_BASE, engine.a0()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::closed_form;
    use crate::model::{merton_value_frictionless, Endowment, ModelParams};
    use approx::assert_relative_eq;

    fn reference() -> (ModelParams, Endowment) {
        (
            ModelParams::new(0.08, 0.4, 0.1, 0.01).unwrap(),
            Endowment::new(0.5, 0.5, 1.0).unwrap(),
        )
    }

    #[test]
    fn constant_term_is_frictionless_value() {
        let (p, e) = reference();
        let v = expand_value_series(4, &p, &e).unwrap();
        assert_relative_eq!(v.coeff(0), merton_value_frictionless(&p, &e), epsilon = 1e-10);
        assert_relative_eq!(v.coeff(0), -31.025850929940457, epsilon = 1e-9);
    }

    #[test]
    fn first_fractional_term_vanishes() {
        let (p, e) = reference();
        let v = expand_value_series(4, &p, &e).unwrap();
        assert!(v.coeff(1).abs() < 1e-10, "eps coefficient = {}", v.coeff(1));
    }

    #[test]
    fn lambda_two_thirds_matches_closed_form() {
        let (p, e) = reference();
        let v = expand_value_series(4, &p, &e).unwrap();
        let expect = closed_form::value_lambda23(&p);
        assert_relative_eq!(v.coeff(2), expect, epsilon = 1e-9);
        assert_relative_eq!(v.coeff(2), -1.0400419115259527, epsilon = 1e-8);
    }

    #[test]
    fn closed_form_holds_across_parameters() {
        for (mu, sigma, delta) in [(0.08, 0.4, 0.1), (0.03, 0.3, 0.07), (0.28, 0.6, 1.0)] {
            let p = ModelParams::new(mu, sigma, delta, 0.01).unwrap();
            let e = Endowment::new(1.0 - p.theta(), p.theta(), 1.0).unwrap();
            let v = expand_value_series(3, &p, &e).unwrap();
            assert_relative_eq!(
                v.coeff(2),
                closed_form::value_lambda23(&p),
                max_relative = 1e-9
            );
            assert!(v.coeff(1).abs() < 1e-9 * v.coeff(0).abs());
        }
    }

    #[test]
    fn off_merton_line_is_rejected() {
        let p = ModelParams::new(0.08, 0.4, 0.1, 0.01).unwrap();
        let e = Endowment::new(0.9, 0.1, 1.0).unwrap();
        assert!(matches!(
            expand_value_series(3, &p, &e),
            Err(EngineError::EndowmentOffMertonLine { .. })
        ));
    }
}
