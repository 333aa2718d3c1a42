//! Market and preference parameters, endowments, convention conversions and
//! the frictionless reference value.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("parameter {name} must be positive, got {value}")]
    NonpositiveParameter { name: &'static str, value: f64 },
    #[error("theta = mu/sigma^2 = {theta} outside (0,1); this regime is unsupported")]
    ThetaOutOfRange { theta: f64 },
    #[error("lambda = {lambda} outside (0,1)")]
    LambdaOutOfRange { lambda: f64 },
    #[error("endowment must be nonnegative with at least one positive position")]
    EmptyEndowment,
    #[error("parameter {name} is not finite")]
    NotFinite { name: &'static str },
}

/// Market and preference constants. `theta = mu/sigma^2` is validated into
/// (0,1) on construction and cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub mu: f64,
    pub sigma: f64,
    pub delta: f64,
    pub lambda: f64,
    #[serde(skip_serializing)]
    theta: f64,
}

impl ModelParams {
    pub fn new(mu: f64, sigma: f64, delta: f64, lambda: f64) -> Result<Self, ModelError> {
        for (name, value) in [("mu", mu), ("sigma", sigma), ("delta", delta), ("lambda", lambda)] {
            if !value.is_finite() {
                return Err(ModelError::NotFinite { name });
            }
        }
        for (name, value) in [("mu", mu), ("sigma", sigma), ("delta", delta)] {
            if value <= 0.0 {
                return Err(ModelError::NonpositiveParameter { name, value });
            }
        }
        let theta = mu / (sigma * sigma);
        // The open condition theta < 1 gets an ulp-width guard so that
        // inputs sitting on the degenerate boundary up to rounding (for
        // example mu = 0.16, sigma = 0.4) classify as the excluded regime.
        if theta <= 0.0 || theta >= 1.0 - 8.0 * f64::EPSILON {
            return Err(ModelError::ThetaOutOfRange { theta });
        }
        if lambda <= 0.0 || lambda >= 1.0 {
            return Err(ModelError::LambdaOutOfRange { lambda });
        }
        Ok(Self { mu, sigma, delta, lambda, theta })
    }

    /// Merton proportion `mu/sigma^2`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Impatience over variance, `delta/sigma^2`.
    pub fn delta_over_sigma2(&self) -> f64 {
        self.delta / (self.sigma * self.sigma)
    }

    /// `cbar = (1-theta)/theta`, the zero-cost limit of the parameter c.
    pub fn c_bar(&self) -> f64 {
        (1.0 - self.theta) / self.theta
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self, ModelError> {
        Self::new(self.mu, self.sigma, self.delta, lambda)
    }
}

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            mu: f64,
            sigma: f64,
            delta: f64,
            lambda: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        ModelParams::new(raw.mu, raw.sigma, raw.delta, raw.lambda)
            .map_err(serde::de::Error::custom)
    }
}

/// See [`ModelParams::new`]; kept as a free function mirroring the CLI entry.
pub fn validate_params(mu: f64, sigma: f64, delta: f64, lambda: f64) -> Result<ModelParams, ModelError> {
    ModelParams::new(mu, sigma, delta, lambda)
}

/// Initial holdings in bond units, stock units, and the initial ask price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Endowment {
    pub eta_b: f64,
    pub eta_s: f64,
    pub s0: f64,
}

impl Endowment {
    pub fn new(eta_b: f64, eta_s: f64, s0: f64) -> Result<Self, ModelError> {
        for (name, value) in [("eta_b", eta_b), ("eta_s", eta_s), ("s0", s0)] {
            if !value.is_finite() {
                return Err(ModelError::NotFinite { name });
            }
        }
        if eta_b < 0.0 || eta_s < 0.0 || (eta_b == 0.0 && eta_s == 0.0) {
            return Err(ModelError::EmptyEndowment);
        }
        if s0 <= 0.0 {
            return Err(ModelError::NonpositiveParameter { name: "s0", value: s0 });
        }
        Ok(Self { eta_b, eta_s, s0 })
    }

    /// Initial wealth at the ask price.
    pub fn wealth_at_ask(&self) -> f64 {
        self.eta_b + self.eta_s * self.s0
    }

    /// Initial fraction of wealth in stock at the ask price.
    pub fn pi0(&self) -> f64 {
        self.eta_s * self.s0 / self.wealth_at_ask()
    }
}

impl<'de> Deserialize<'de> for Endowment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            eta_b: f64,
            eta_s: f64,
            s0: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        Endowment::new(raw.eta_b, raw.eta_s, raw.s0).map_err(serde::de::Error::custom)
    }
}

/// No-trade band in fractions of wealth at the ask price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyBoundaries {
    pub theta_lower: f64,
    pub theta_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadConvention {
    /// One-sided: bid `(1-lambda)S`, ask `S`.
    ToSymmetric,
    /// From the symmetric convention bid `(1-l)S`, ask `(1+l)S`.
    FromSymmetric,
}

/// Convert the relative spread between the one-sided and the symmetric
/// conventions; the two directions are mutual inverses on (0,1).
pub fn lambda_convention_convert(value: f64, direction: SpreadConvention) -> Result<f64, ModelError> {
    if !(value > 0.0 && value < 1.0) {
        return Err(ModelError::LambdaOutOfRange { lambda: value });
    }
    Ok(match direction {
        SpreadConvention::ToSymmetric => value / (2.0 - value),
        SpreadConvention::FromSymmetric => 2.0 * value / (1.0 + value),
    })
}

/// Value of the frictionless infinite-horizon log-utility problem,
/// `(1/delta) log(delta(eta_b + eta_s S0)) + (mu^2/(2 sigma^2) - delta)/delta^2`.
/// An upper bound for the value with transaction costs.
pub fn merton_value_frictionless(params: &ModelParams, endowment: &Endowment) -> f64 {
    let d = params.delta;
    (d * endowment.wealth_at_ask()).ln() / d
        + (params.mu * params.mu / (2.0 * params.sigma * params.sigma) - d) / (d * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn validate_reference_params() {
        let p = ModelParams::new(0.08, 0.4, 0.1, 0.01).unwrap();
        assert_relative_eq!(p.theta(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(p.delta_over_sigma2(), 0.625, max_relative = 1e-15);
        assert_relative_eq!(p.c_bar(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn theta_one_is_rejected() {
        // the degenerate regime theta = 1 is out of scope
        let err = ModelParams::new(0.16, 0.4, 0.1, 0.01).unwrap_err();
        assert!(matches!(err, ModelError::ThetaOutOfRange { .. }));
    }

    #[test]
    fn lambda_bounds_are_strict() {
        assert!(matches!(
            ModelParams::new(0.08, 0.4, 0.1, 0.0),
            Err(ModelError::LambdaOutOfRange { .. })
        ));
        assert!(matches!(
            ModelParams::new(0.08, 0.4, 0.1, 1.0),
            Err(ModelError::LambdaOutOfRange { .. })
        ));
    }

    #[test]
    fn nonpositive_parameters_named() {
        let err = ModelParams::new(0.08, -0.4, 0.1, 0.01).unwrap_err();
        assert_eq!(err, ModelError::NonpositiveParameter { name: "sigma", value: -0.4 });
        assert!(ModelParams::new(0.08, 0.4, 0.0, 0.01).is_err());
    }

    #[test]
    fn endowment_validation() {
        assert!(Endowment::new(0.0, 0.0, 1.0).is_err());
        assert!(Endowment::new(-1.0, 1.0, 1.0).is_err());
        assert!(Endowment::new(0.0, 1.0, 0.0).is_err());
        let e = Endowment::new(0.5, 0.5, 1.0).unwrap();
        assert_relative_eq!(e.pi0(), 0.5);
    }

    #[test]
    fn lambda_conversion_examples() {
        let v = lambda_convention_convert(0.01, SpreadConvention::ToSymmetric).unwrap();
        assert_relative_eq!(v, 0.01 / 1.99, max_relative = 1e-15);
        let back = lambda_convention_convert(v, SpreadConvention::FromSymmetric).unwrap();
        assert_relative_eq!(back, 0.01, max_relative = 1e-14);
        // small-lambda limit
        let tiny = lambda_convention_convert(1e-12, SpreadConvention::ToSymmetric).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-11);
        assert!(lambda_convention_convert(0.0, SpreadConvention::ToSymmetric).is_err());
        assert!(lambda_convention_convert(1.0, SpreadConvention::FromSymmetric).is_err());
    }

    #[test]
    fn merton_value_reference() {
        let p = ModelParams::new(0.08, 0.4, 0.1, 0.01).unwrap();
        let e = Endowment::new(0.5, 0.5, 1.0).unwrap();
        // (1/0.1) ln(0.1) + (0.02 - 0.1)/0.01 = -23.02585... - 8
        let v = merton_value_frictionless(&p, &e);
        assert_relative_eq!(v, -23.025850929940457 - 8.0, epsilon = 1e-12);
    }

    #[test]
    fn merton_value_unit_argument() {
        // delta * wealth = 1 leaves only the quadratic term
        let p = ModelParams::new(0.08, 0.4, 0.1, 0.01).unwrap();
        let e = Endowment::new(5.0, 5.0, 1.0).unwrap();
        let v = merton_value_frictionless(&p, &e);
        assert_relative_eq!(v, (0.02 - 0.1) / 0.01, epsilon = 1e-12);
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn theta_invariant_under_rescaling(a in 0.1f64..10.0) {
            let p = ModelParams::new(0.08, 0.4, 0.1, 0.01).unwrap();
            let q = ModelParams::new(a * a * p.mu, a * p.sigma, p.delta, p.lambda).unwrap();
            prop_assert!((p.theta() - q.theta()).abs() < 1e-12);
        }

        #[test]
        fn lambda_conversion_bijection(x in 1e-6f64..0.999999, y in 1e-6f64..0.999999) {
            let fx = lambda_convention_convert(x, SpreadConvention::ToSymmetric).unwrap();
            let fy = lambda_convention_convert(y, SpreadConvention::ToSymmetric).unwrap();
            prop_assert!(fx > 0.0 && fx < 1.0);
            // strictly increasing
            if x < y {
                prop_assert!(fx < fy);
            }
            let back = lambda_convention_convert(fx, SpreadConvention::FromSymmetric).unwrap();
            prop_assert!((back - x).abs() <= 1e-14 * x.max(1e-6));
        }
    }
}
