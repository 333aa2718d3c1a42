//! Exact-coefficient truncated series arithmetic.
//!
//! Supports the fractional expansions in `lambda^(1/3)` and the bivariate
//! Taylor recursion behind them. Coefficients are generic: `f64` for
//! production, `BigRational` when the inputs are rational and golden tests
//! want exact equality.

mod bivariate;
mod puiseux;
mod scalar;

pub use bivariate::{solve_implicit, BivariateSeries};
pub use puiseux::{PuiseuxSeries, SeriesError};
pub use scalar::Scalar;

pub type Rational = num_rational::BigRational;

#[cfg(test)]
mod tests {
    use super::*;

    type S = PuiseuxSeries<f64>;
    type R = PuiseuxSeries<Rational>;

    fn rat(num: i64, den: i64) -> Rational {
        <Rational as Scalar>::from_ratio(num, den)
    }

    #[test]
    fn mul_difference_of_squares() {
        let a = S::new("e", vec![1.0, 1.0, 0.0]);
        let b = S::new("e", vec![1.0, -1.0, 0.0]);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.coeffs(), &[1.0, 0.0, -1.0]);
    }

    #[test]
    fn mul_identity_element() {
        let a = S::new("e", vec![2.0, 3.0, 5.0, 7.0]);
        let one = S::constant("e", 1.0, 3);
        assert_eq!(a.mul(&one).unwrap(), a);
    }

    #[test]
    fn mul_truncates_to_min_order() {
        // (e)*(e) at order 1: the e^2 term falls outside the stored window
        let e = S::variable("e", 1);
        let p = e.mul(&e).unwrap();
        assert_eq!(p.coeffs(), &[0.0, 0.0]);
    }

    #[test]
    fn mul_base_mismatch_is_error() {
        let a = S::variable("e", 2);
        let b = S::variable("z", 2);
        assert!(matches!(a.mul(&b), Err(SeriesError::BaseMismatch(_, _))));
    }

    #[test]
    fn pow_binomial_oracle() {
        // (1+3e)^{1/3} term-by-term against the binomial series
        let a = S::new("e", vec![1.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let p = a.pow_frac(1, 3).unwrap();
        let mut binom = vec![0.0f64; 8];
        let r = 1.0 / 3.0;
        let mut c = 1.0;
        for (k, b) in binom.iter_mut().enumerate() {
            *b = c * 3f64.powi(k as i32);
            c *= (r - k as f64) / (k as f64 + 1.0);
        }
        for k in 0..8 {
            assert!((p.coeff(k) - binom[k]).abs() < 1e-12 * binom[k].abs().max(1.0), "k={k}");
        }
        assert!((p.coeff(1) - 1.0).abs() < 1e-14);
        assert!((p.coeff(2) + 1.0).abs() < 1e-14);
        assert!((p.coeff(3) - 5.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn pow_exponent_one_and_zero() {
        let a = S::new("e", vec![1.0, 2.0, -0.5, 0.25]);
        assert_eq!(a.pow_frac(1, 1).unwrap(), a);
        let p0 = a.pow_frac(0, 1).unwrap();
        assert_eq!(p0.coeffs(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pow_rational_exact() {
        let a = R::new("e", vec![rat(1, 1), rat(3, 1), rat(0, 1), rat(0, 1)]);
        let p = a.pow_frac(1, 3).unwrap();
        assert_eq!(p.coeff(1), rat(1, 1));
        assert_eq!(p.coeff(2), rat(-1, 1));
        assert_eq!(p.coeff(3), rat(5, 3));
        // non-perfect-power constant terms are rejected in exact mode
        let b = R::new("e", vec![rat(2, 1), rat(1, 1)]);
        assert!(matches!(b.pow_frac(1, 3), Err(SeriesError::NoExactRoot(3))));
    }

    /// Brute-force reversion oracle: build the inverse term by term so that
    /// the composition is the identity, independent of Lagrange inversion.
    fn reversion_bruteforce(a: &S) -> S {
        let n = a.order();
        let mut b = S::zero("e", n);
        for k in 1..=n {
            let comp = a.compose(&b).unwrap();
            let target = if k == 1 { 1.0 } else { 0.0 };
            // adjusting b_k changes [v^k](a o b) by a_1 * b_k
            let delta = (target - comp.coeff(k)) / a.coeff(1);
            let mut coeffs = b.coeffs().to_vec();
            coeffs[k] += delta;
            b = S::new("e", coeffs);
        }
        b
    }

    #[test]
    fn reversion_of_z_plus_z2_matches_bruteforce_through_order_8() {
        let mut coeffs = vec![0.0; 9];
        coeffs[1] = 1.0;
        coeffs[2] = 1.0;
        let a = S::new("e", coeffs);
        let lagrange = a.reversion().unwrap();
        let brute = reversion_bruteforce(&a);
        for k in 0..=8 {
            assert!(
                (lagrange.coeff(k) - brute.coeff(k)).abs() < 1e-9 * brute.coeff(k).abs().max(1.0),
                "k={k}: {} vs {}",
                lagrange.coeff(k),
                brute.coeff(k)
            );
        }
        // signed Catalan numbers
        for (k, expect) in [(1, 1.0), (2, -1.0), (3, 2.0), (4, -5.0), (5, 14.0), (6, -42.0)] {
            assert!((lagrange.coeff(k) - expect).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn reversion_identity_and_linear() {
        let id = S::variable("e", 5);
        assert_eq!(id.reversion().unwrap(), id);
        let two_z = id.scale(&2.0);
        let inv = two_z.reversion().unwrap();
        assert!((inv.coeff(1) - 0.5).abs() < 1e-15);
        for k in [0usize, 2, 3, 4, 5] {
            assert!(inv.coeff(k).abs() < 1e-15);
        }
    }

    #[test]
    fn reversion_rejects_bad_input() {
        let a = S::new("e", vec![1.0, 1.0]);
        assert!(matches!(a.reversion(), Err(SeriesError::InvalidReversion)));
        let b = S::new("e", vec![0.0, 0.0, 1.0]);
        assert!(matches!(b.reversion(), Err(SeriesError::InvalidReversion)));
    }

    #[test]
    fn shift_down_requires_vanishing_low_orders() {
        let a = S::new("e", vec![0.0, 0.0, 3.0, 4.0]);
        let s = a.shift_down(2).unwrap();
        assert_eq!(s.coeffs(), &[3.0, 4.0]);
        let b = S::new("e", vec![0.5, 0.0, 3.0]);
        assert!(matches!(b.shift_down(1), Err(SeriesError::NonzeroLowOrder(0))));
    }

    #[test]
    fn display_renders_human_readable() {
        let a = S::new("lambda^(1/3)", vec![1.0, 0.0, -2.5]);
        let s = format!("{a}");
        assert!(s.contains("1"));
        assert!(s.contains("-2.5·lambda^(1/3)^2"));
        assert!(s.contains("O(lambda^(1/3)^3)"));
    }

    #[test]
    fn json_shape() {
        let a = S::new("lambda^(1/3)", vec![1.0, 2.0]);
        let v = a.to_json();
        assert_eq!(v["base"], "lambda^(1/3)");
        assert_eq!(v["order"], 1);
        assert_eq!(v["coeffs"][1], 2.0);
    }

    // ---- property tests: ring axioms and structural identities ----

    use proptest::prelude::*;

    fn arb_rat_series(order: usize) -> impl Strategy<Value = R> {
        proptest::collection::vec((-40i64..40, 1i64..12), order + 1).prop_map(move |v| {
            R::new("e", v.into_iter().map(|(n, d)| rat(n, d)).collect())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ring_axioms_exact_order_12(
            a in arb_rat_series(12),
            b in arb_rat_series(12),
            c in arb_rat_series(12),
        ) {
            let ab_c = a.mul(&b).unwrap().mul(&c).unwrap();
            let a_bc = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            let dist = a.mul(&b.add(&c).unwrap()).unwrap();
            let expand = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(dist, expand);
            let comm = a.mul(&b).unwrap();
            let comm2 = b.mul(&a).unwrap();
            prop_assert_eq!(comm, comm2);
        }

        #[test]
        fn pow_law_additive_in_exponent(
            tail in proptest::collection::vec((-20i64..20, 1i64..8), 8),
            p in -3i64..4,
            q in -3i64..4,
        ) {
            let mut coeffs = vec![rat(1, 1)];
            coeffs.extend(tail.into_iter().map(|(n, d)| rat(n, d)));
            let a = R::new("e", coeffs);
            let lhs = a.pow_frac(p, 3).unwrap().mul(&a.pow_frac(q, 3).unwrap()).unwrap();
            let rhs = a.pow_frac(p + q, 3).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn reversion_is_involutive(
            lead in 1i64..6,
            tail in proptest::collection::vec((-10i64..10, 1i64..6), 10),
        ) {
            let mut coeffs = vec![rat(0, 1), rat(lead, 1)];
            coeffs.extend(tail.into_iter().map(|(n, d)| rat(n, d)));
            let a = R::new("e", coeffs);
            let back = a.reversion().unwrap().reversion().unwrap();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn reversion_composes_to_identity(
            tail in proptest::collection::vec((-10i64..10, 1i64..6), 9),
        ) {
            let mut coeffs = vec![rat(0, 1), rat(1, 1)];
            coeffs.extend(tail.into_iter().map(|(n, d)| rat(n, d)));
            let a = R::new("e", coeffs);
            let b = a.reversion().unwrap();
            let comp = a.compose(&b).unwrap();
            for k in 0..=a.order() {
                let expect = if k == 1 { rat(1, 1) } else { rat(0, 1) };
                prop_assert_eq!(comp.coeff(k), expect);
            }
        }
    }
}
