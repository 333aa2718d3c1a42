//! Fractional expansions in `lambda^{1/3}` of the free boundary, the
//! no-trade region, and the value function, to arbitrary truncation order.

mod engine;
mod value;

pub use engine::{
    taylor_g_series, EngineError, ExpansionEngine, EPS_BASE, EPS_JS_BASE, T_BASE, T_JS_BASE,
    U_BASE,
};
pub use value::expand_value_series;

use crate::model::{Endowment, ModelParams};
use crate::series::{BivariateSeries, PuiseuxSeries};
use serde::Serialize;

/// Default truncation order in `eps = lambda^{1/3}` (two full lambda-orders
/// past the three printed correction terms).
pub const DEFAULT_ORDER: usize = 6;

fn engine_for(params: &ModelParams, order: usize) -> Result<ExpansionEngine<f64>, EngineError> {
    ExpansionEngine::build(params.theta(), params.delta_over_sigma2(), order)
}

/// Taylor coefficients of `g(s,c)` around `(1, cbar)` in
/// `(s-1)^i (c-cbar)^j`.
pub fn taylor_g(
    order_s: usize,
    order_c: usize,
    params: &ModelParams,
) -> Result<BivariateSeries<f64>, EngineError> {
    taylor_g_series(&params.theta(), &params.delta_over_sigma2(), order_s, order_c)
}

/// `H(c) = s_bar` as a series in `c - cbar`.
pub fn expand_h(order: usize, params: &ModelParams) -> Result<PuiseuxSeries<f64>, EngineError> {
    let eng = engine_for(params, order)?;
    Ok(eng.h_tilde().add_constant(&1.0).truncate(order))
}

/// `c(lambda)` as a series in `eps = lambda^{1/3}`.
pub fn expand_c(order: usize, params: &ModelParams) -> Result<PuiseuxSeries<f64>, EngineError> {
    let eng = engine_for(params, order)?;
    Ok(eng.to_eps(eng.c_t(), EPS_BASE, eng.a0()))
}

/// `s_bar(lambda)` as a series in `eps = lambda^{1/3}`.
pub fn expand_sbar(order: usize, params: &ModelParams) -> Result<PuiseuxSeries<f64>, EngineError> {
    let eng = engine_for(params, order)?;
    Ok(eng.to_eps(eng.sbar_t(), EPS_BASE, eng.a0()))
}

/// No-trade band expansions in `eps = lambda^{1/3}`.
pub struct PolicyExpansion {
    pub theta_lower: PuiseuxSeries<f64>,
    pub theta_upper: PuiseuxSeries<f64>,
    pub gap: PuiseuxSeries<f64>,
}

pub fn expand_policy(order: usize, params: &ModelParams) -> Result<PolicyExpansion, EngineError> {
    let eng = engine_for(params, order)?;
    Ok(PolicyExpansion {
        theta_lower: eng.to_eps(eng.theta_lower_t(), EPS_BASE, eng.a0()),
        theta_upper: eng.to_eps(eng.theta_upper_t(), EPS_BASE, eng.a0()),
        gap: eng.to_eps(eng.gap_t(), EPS_BASE, eng.a0()),
    })
}

/// No-trade boundaries re-expanded in the symmetric-spread convention, as
/// series in `lambda_check^{1/3}`.
pub fn expand_js_convention(
    order: usize,
    params: &ModelParams,
) -> Result<(PuiseuxSeries<f64>, PuiseuxSeries<f64>), EngineError> {
    let eng = engine_for(params, order)?;
    let (lo, hi) = eng.js_boundaries_t()?;
    let scale_cubed = 2.0 * eng.a0();
    Ok((
        eng.to_eps(&lo, EPS_JS_BASE, &scale_cubed),
        eng.to_eps(&hi, EPS_JS_BASE, &scale_cubed),
    ))
}

/// Value expansion on the Merton line, in `eps = lambda^{1/3}`.
pub fn expand_value(
    order: usize,
    params: &ModelParams,
    endowment: &Endowment,
) -> Result<PuiseuxSeries<f64>, EngineError> {
    expand_value_series(order, params, endowment)
}

/// All expansions for one parameter set.
#[derive(Debug, Serialize)]
pub struct ExpansionBundle {
    pub order: usize,
    pub params: ModelParams,
    pub c_series: PuiseuxSeries<f64>,
    pub sbar_series: PuiseuxSeries<f64>,
    pub theta_lower_series: PuiseuxSeries<f64>,
    pub theta_upper_series: PuiseuxSeries<f64>,
    pub gap_series: PuiseuxSeries<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_series: Option<PuiseuxSeries<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub js_lower_series: Option<PuiseuxSeries<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub js_upper_series: Option<PuiseuxSeries<f64>>,
}

pub fn expansion_bundle(
    order: usize,
    params: &ModelParams,
    endowment: Option<&Endowment>,
    js_convention: bool,
) -> Result<ExpansionBundle, EngineError> {
    let eng = engine_for(params, order)?;
    let (js_lower_series, js_upper_series) = if js_convention {
        let (lo, hi) = eng.js_boundaries_t()?;
        let scale_cubed = 2.0 * eng.a0();
        (
            Some(eng.to_eps(&lo, EPS_JS_BASE, &scale_cubed)),
            Some(eng.to_eps(&hi, EPS_JS_BASE, &scale_cubed)),
        )
    } else {
        (None, None)
    };
    let value_series = match endowment {
        Some(e) => Some(expand_value_series(order, params, e)?),
        None => None,
    };
    Ok(ExpansionBundle {
        order,
        params: *params,
        c_series: eng.to_eps(eng.c_t(), EPS_BASE, eng.a0()),
        sbar_series: eng.to_eps(eng.sbar_t(), EPS_BASE, eng.a0()),
        theta_lower_series: eng.to_eps(eng.theta_lower_t(), EPS_BASE, eng.a0()),
        theta_upper_series: eng.to_eps(eng.theta_upper_t(), EPS_BASE, eng.a0()),
        gap_series: eng.to_eps(eng.gap_t(), EPS_BASE, eng.a0()),
        value_series,
        js_lower_series,
        js_upper_series,
    })
}

/// Printed closed forms of the leading expansion coefficients, used as
/// golden references by the test suites.
pub mod closed_form {
    use crate::model::ModelParams;

    fn r6(theta: f64) -> f64 {
        (6.0 / (theta * (1.0 - theta))).cbrt()
    }

    /// `[cbar, c1, c2]` of `c = cbar + c1 eps + c2 eps^2 + O(lambda)`.
    pub fn c_coeffs(theta: f64, dos2: f64) -> [f64; 3] {
        [
            (1.0 - theta) / theta,
            (1.0 - theta) / (2.0 * theta) * r6(theta),
            (2.0 * dos2 + 3.0 * (1.0 - theta) * (1.0 - theta)) / (12.0 * theta)
                * r6(theta).powi(2),
        ]
    }

    /// `[1, s1, s2]` of the `s_bar` expansion.
    pub fn sbar_coeffs(theta: f64) -> [f64; 3] {
        [1.0, r6(theta), 0.5 * r6(theta).powi(2)]
    }

    /// `[theta, l1, l2, l3]` of the lower boundary expansion (coefficients
    /// of `1, eps, eps^2, eps^3`).
    pub fn theta_lower_coeffs(theta: f64, dos2: f64) -> [f64; 4] {
        let l3 = theta
            * (9.0 * (1.0 - theta).powi(2) * (1.0 - 2.0 * theta + 2.0 * theta * theta)
                - 4.0 * dos2 * dos2
                + 6.0 * dos2 * (3.0 - 8.0 * theta + 5.0 * theta * theta))
            / (360.0 * (1.0 - theta))
            * 6.0
            / (theta * (1.0 - theta));
        [
            theta,
            -(0.75 * theta * theta * (1.0 - theta) * (1.0 - theta)).cbrt(),
            -dos2 * theta / 6.0 * r6(theta).powi(2),
            l3,
        ]
    }

    /// `[theta, u1, u2, u3]` of the upper boundary expansion.
    pub fn theta_upper_coeffs(theta: f64, dos2: f64) -> [f64; 4] {
        let u3 = -theta
            * (3.0 * (1.0 - theta).powi(2) * (3.0 - 26.0 * theta + 26.0 * theta * theta)
                - 4.0 * dos2 * dos2
                + 6.0 * dos2 * (3.0 - 8.0 * theta + 5.0 * theta * theta))
            / (360.0 * (1.0 - theta))
            * 6.0
            / (theta * (1.0 - theta));
        [
            theta,
            (0.75 * theta * theta * (1.0 - theta) * (1.0 - theta)).cbrt(),
            -dos2 * theta / 6.0 * r6(theta).powi(2),
            u3,
        ]
    }

    /// `[0, g1, 0, g3]` of the no-trade gap expansion; the `eps^2` term is
    /// exactly zero.
    pub fn gap_coeffs(theta: f64, dos2: f64) -> [f64; 4] {
        let g3 = -theta
            * (3.0 * (1.0 - theta).powi(2) * (3.0 - 16.0 * theta + 16.0 * theta * theta)
                - 4.0 * dos2 * dos2
                + 6.0 * dos2 * (3.0 - 8.0 * theta + 5.0 * theta * theta))
            / (180.0 * (1.0 - theta))
            * 6.0
            / (theta * (1.0 - theta));
        [
            0.0,
            (6.0 * theta * theta * (1.0 - theta) * (1.0 - theta)).cbrt(),
            0.0,
            g3,
        ]
    }

    /// `[theta, -j1, -j2]` and `[theta, +j1, -j2]` of the symmetric-spread
    /// boundary expansions in `lambda_check^{1/3}`.
    pub fn js_coeffs(theta: f64, dos2: f64) -> ([f64; 3], [f64; 3]) {
        let j1 = (1.5 * theta * theta * (1.0 - theta) * (1.0 - theta)).cbrt();
        let j2 = -2.0 * theta * dos2
            * (12.0 * theta * theta * (1.0 - theta) * (1.0 - theta)).powf(-1.0 / 3.0);
        ([theta, -j1, j2], [theta, j1, j2])
    }

    /// Coefficient of `lambda^{2/3}` in the value expansion:
    /// `-3^{2/3} (mu (sigma^2 - mu))^{4/3} / (4 * 2^{1/3} delta^2 sigma^{10/3})`.
    pub fn value_lambda23(params: &ModelParams) -> f64 {
        let mu = params.mu;
        let sigma = params.sigma;
        let delta = params.delta;
        -3f64.powf(2.0 / 3.0) * (mu * (sigma * sigma - mu)).powf(4.0 / 3.0)
            / (4.0 * 2f64.cbrt() * delta * delta * sigma.powf(10.0 / 3.0))
    }
}
