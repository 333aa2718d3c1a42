//! Simulation of the reflected state process, the shadow price, the optimal
//! strategy, and Monte Carlo estimation of expected utility.

mod rng;

pub use rng::path_rng;

use crate::freeboundary::GSolution;
use crate::model::Endowment;
use crate::valuefn::ValueFunction;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::OnceLock;

/// Environment variable capping the worker count for path-parallel runs.
pub const THREADS_ENV: &str = "SHADOW_MERTON_THREADS";

static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();

/// Run `f` inside the worker pool configured by `SHADOW_MERTON_THREADS`
/// (global pool when unset). Results never depend on the worker count.
pub(crate) fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let pool = POOL.get_or_init(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .map(|n| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .expect("worker pool construction")
            })
    });
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Y0Policy {
    FromEndowment,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub paths: u64,
    pub seed: u64,
    pub y0: Y0Policy,
    pub antithetic: bool,
}

impl SimConfig {
    pub fn new(horizon: f64, dt: f64, paths: u64, seed: u64) -> Self {
        assert!(dt > 0.0 && horizon >= dt && paths >= 1);
        Self { horizon, dt, paths, seed, y0: Y0Policy::FromEndowment, antithetic: false }
    }

    fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }

    fn dt_effective(&self) -> f64 {
        self.horizon / self.steps() as f64
    }
}

/// Initial bulk trade moving the starting fraction to the nearest band edge.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TradeRecord {
    /// Stock units bought (positive) or sold (negative).
    pub d_stock: f64,
    /// Bond units received (positive) or paid (negative).
    pub d_bond: f64,
    /// Execution price: ask for purchases, bid for sales.
    pub price: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InitialState {
    pub y0: f64,
    pub s_tilde0: f64,
    pub jump: TradeRecord,
}

/// Starting state of the reflected process and the initial re-balancing
/// trade: `y0 = 1` when bonds dominate (`eta_b > S0 c eta_s`), `y0 = s_bar`
/// when stock dominates, interior `S0 c eta_s / eta_b` otherwise.
pub fn initial_state(endowment: &Endowment, sol: &GSolution) -> InitialState {
    let c = sol.c();
    let s_bar = sol.s_bar();
    let s0 = endowment.s0;
    let stock_scale = s0 * c * endowment.eta_s;
    let y0 = if endowment.eta_b > stock_scale {
        1.0
    } else if endowment.eta_b < stock_scale / s_bar {
        s_bar
    } else {
        stock_scale / endowment.eta_b
    };
    let s_tilde0 = s0 / y0 * sol.g(y0);
    let v0 = endowment.eta_b + endowment.eta_s * s_tilde0;
    let g_y0 = sol.g(y0);
    let pi0 = g_y0 / (c + g_y0);
    let phi0 = pi0 * v0 / s_tilde0;
    let d_stock = phi0 - endowment.eta_s;
    InitialState {
        y0,
        s_tilde0,
        jump: TradeRecord { d_stock, d_bond: -d_stock * s_tilde0, price: s_tilde0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectedStep {
    pub y: f64,
    pub d_l: f64,
    pub d_u: f64,
}

#[inline]
fn step_reflected_inner(
    y: f64,
    g: f64,
    dw: f64,
    dt: f64,
    mu: f64,
    sigma: f64,
    delta: f64,
    c: f64,
    s_bar: f64,
) -> ReflectedStep {
    let drift = mu + delta * (1.0 + g / c);
    let proposal = (y * (1.0 + drift * dt + sigma * dw)).max(1e-12);
    if proposal < 1.0 {
        ReflectedStep { y: 1.0, d_l: -proposal.ln(), d_u: 0.0 }
    } else if proposal > s_bar {
        ReflectedStep { y: s_bar, d_l: 0.0, d_u: (proposal / s_bar).ln() }
    } else {
        ReflectedStep { y: proposal, d_l: 0.0, d_u: 0.0 }
    }
}

/// One Euler step of the reflected state: multiplicative proposal, then
/// projection onto `[1, s_bar]` with the local-time increments booked as
/// `dL = log(1/Y*)` resp. `dU = log(Y*/s_bar)` (consistent with `dY = Y dL`).
pub fn step_reflected(y: f64, dw: f64, dt: f64, sol: &GSolution) -> ReflectedStep {
    let p = sol.params();
    step_reflected_inner(
        y,
        sol.g(y),
        dw,
        dt,
        p.mu,
        p.sigma,
        p.delta,
        sol.c(),
        sol.s_bar(),
    )
}

/// Simulated reflected state with its boundary pushing processes and the
/// driving noise and ask price.
#[derive(Debug, Clone, Serialize)]
pub struct ReflectedPath {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub dw: Vec<f64>,
    pub s: Vec<f64>,
}

/// Strategy quantities derived along one path.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyPath {
    pub s_tilde: Vec<f64>,
    pub pi_tilde: Vec<f64>,
    pub v: Vec<f64>,
    pub kappa: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi0: Vec<f64>,
}

/// Simulate one full path (stream index 0 of the configured seed), storing
/// every grid point. The ask price is advanced by exact log-normal
/// increments on the same Brownian increments as the state.
pub fn simulate_path(
    config: &SimConfig,
    sol: &GSolution,
    endowment: &Endowment,
) -> (ReflectedPath, StrategyPath) {
    let steps = config.steps();
    let dt = config.dt_effective();
    let p = *sol.params();
    let c = sol.c();
    let init = initial_state(endowment, sol);
    let y0 = match config.y0 {
        Y0Policy::FromEndowment => init.y0,
        Y0Policy::Explicit(y) => y.clamp(1.0, sol.s_bar()),
    };
    let mut rng = path_rng(config.seed, 0);
    let sqrt_dt = dt.sqrt();

    let n = steps + 1;
    let mut rp = ReflectedPath {
        times: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        l: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        dw: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
    };
    let mut sp = StrategyPath {
        s_tilde: Vec::with_capacity(n),
        pi_tilde: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        kappa: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        phi0: Vec::with_capacity(n),
    };

    let mut y = y0;
    let mut log_s = endowment.s0.ln();
    let mut l_cum = 0.0;
    let mut u_cum = 0.0;
    let (g0, _) = sol.g_gp(y0);
    let s_tilde0 = endowment.s0 / y0 * g0;
    let mut log_v = (endowment.eta_b + endowment.eta_s * s_tilde0).ln();

    let record = |t: f64,
                      y: f64,
                      l: f64,
                      u: f64,
                      dw: f64,
                      log_s: f64,
                      log_v: f64,
                      g: f64,
                      rp: &mut ReflectedPath,
                      sp: &mut StrategyPath| {
        let s = log_s.exp();
        let v = log_v.exp();
        let s_tilde = s / y * g;
        let pi = g / (c + g);
        rp.times.push(t);
        rp.y.push(y);
        rp.l.push(l);
        rp.u.push(u);
        rp.dw.push(dw);
        rp.s.push(s);
        sp.s_tilde.push(s_tilde);
        sp.pi_tilde.push(pi);
        sp.v.push(v);
        sp.kappa.push(p.delta * v);
        sp.phi.push(pi * v / s_tilde);
        sp.phi0.push((1.0 - pi) * v);
    };

    record(0.0, y, 0.0, 0.0, 0.0, log_s, log_v, g0, &mut rp, &mut sp);
    for k in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        let dw = sqrt_dt * z;
        let (g, gp) = sol.g_gp(y);
        // shadow coefficients at the pre-step state
        let sigma_t = p.sigma * gp * y / g;
        let mu_t = sigma_t * sigma_t * g / (c + g);
        let pi = g / (c + g);
        log_v += (pi * mu_t - p.delta - 0.5 * pi * pi * sigma_t * sigma_t) * dt
            + pi * sigma_t * dw;
        log_s += (p.mu - 0.5 * p.sigma * p.sigma) * dt + p.sigma * dw;
        let step = step_reflected_inner(y, g, dw, dt, p.mu, p.sigma, p.delta, c, sol.s_bar());
        y = step.y;
        l_cum += step.d_l;
        u_cum += step.d_u;
        let (g_new, _) = sol.g_gp(y);
        record(
            k as f64 * dt,
            y,
            l_cum,
            u_cum,
            dw,
            log_s,
            log_v,
            g_new,
            &mut rp,
            &mut sp,
        );
    }
    (rp, sp)
}

/// RMS of the stock-position increments over interior steps (no boundary
/// pushing on either end of the step); vanishes with the step size.
pub fn phi_interior_flatness_rms(rp: &ReflectedPath, sp: &StrategyPath) -> f64 {
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for k in 1..rp.times.len() {
        let interior = rp.l[k] == rp.l[k - 1] && rp.u[k] == rp.u[k - 1];
        if interior {
            let d_phi = sp.phi[k] - sp.phi[k - 1];
            sum_sq += d_phi * d_phi;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        (sum_sq / count as f64).sqrt()
    }
}

/// Monte Carlo estimate of expected utility with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UtilityEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    /// Mean of the discounted terminal continuation term
    /// `e^{-delta T}(log(V_T)/delta + w(Y_T))`.
    pub tail_correction: f64,
    pub paths: u64,
    pub invariant_violations: u64,
}

struct PathOutcome {
    m_terminal: f64,
    tail: f64,
    violations: u64,
}

fn utility_one_path(
    stream: u64,
    negate: bool,
    steps: usize,
    dt: f64,
    y0: f64,
    log_v0: f64,
    seed: u64,
    sol: &GSolution,
    vf: &ValueFunction,
) -> PathOutcome {
    let p = sol.params();
    let (mu, sigma, delta) = (p.mu, p.sigma, p.delta);
    let lambda = p.lambda;
    let c = sol.c();
    let s_bar = sol.s_bar();
    let mut rng = path_rng(seed, stream);
    let sqrt_dt = dt.sqrt();
    let decay = (-delta * dt).exp();
    let log_delta = delta.ln();

    let mut y = y0;
    let mut log_v = log_v0;
    let mut disc = 1.0;
    let mut integral = 0.0;
    let mut f_prev = log_delta + log_v;
    let mut violations = 0u64;

    for _ in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        let dw = if negate { -sqrt_dt * z } else { sqrt_dt * z };
        let (g, gp) = sol.g_gp(y);
        let sigma_t = sigma * gp * y / g;
        let pi = g / (c + g);
        let mu_t = sigma_t * sigma_t * pi;
        log_v += (pi * mu_t - delta - 0.5 * pi * pi * sigma_t * sigma_t) * dt
            + pi * sigma_t * dw;
        let step = step_reflected_inner(y, g, dw, dt, mu, sigma, delta, c, s_bar);
        y = step.y;
        disc *= decay;
        let f = disc * (log_delta + log_v);
        integral += 0.5 * dt * (f_prev + f);
        f_prev = f;

        // grid-point invariants: containment is exact by construction,
        // the ratio check guards the interpolant
        if !(1.0..=s_bar).contains(&y) {
            violations += 1;
        }
        let ratio = sol.g(y) / y;
        if ratio > 1.0 + 1e-10 || ratio < 1.0 - lambda - 1e-10 {
            violations += 1;
        }
    }
    let tail = disc * (log_v / delta + vf.w(y));
    PathOutcome { m_terminal: integral + tail, tail, violations }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = v - comp;
        let s = sum + t;
        comp = (s - sum) - t;
        sum = s;
    }
    sum
}

/// Estimate `E \int_0^T e^{-delta t} log(kappa_t) dt` by the trapezoid rule
/// plus the continuation correction `E[e^{-delta T}(log(V_T)/delta + w(Y_T))]`
/// from the simulated terminal states, making the estimator the terminal
/// value of the associated martingale.
pub fn mc_expected_utility(
    config: &SimConfig,
    sol: &GSolution,
    vf: &ValueFunction,
    endowment: &Endowment,
) -> UtilityEstimate {
    let steps = config.steps();
    let dt = config.dt_effective();
    let init = initial_state(endowment, sol);
    let y0 = match config.y0 {
        Y0Policy::FromEndowment => init.y0,
        Y0Policy::Explicit(y) => y.clamp(1.0, sol.s_bar()),
    };
    let log_v0 = (endowment.eta_b + endowment.eta_s * init.s_tilde0).ln();

    let outcomes: Vec<PathOutcome> = with_pool(|| {
        (0..config.paths)
            .into_par_iter()
            .map(|i| {
                let (stream, negate) = if config.antithetic {
                    (i / 2, i % 2 == 1)
                } else {
                    (i, false)
                };
                utility_one_path(stream, negate, steps, dt, y0, log_v0, config.seed, sol, vf)
            })
            .collect()
    });

    let n = outcomes.len() as f64;
    let mean = kahan_sum(outcomes.iter().map(|o| o.m_terminal)) / n;
    let var = kahan_sum(outcomes.iter().map(|o| {
        let d = o.m_terminal - mean;
        d * d
    })) / (n - 1.0).max(1.0);
    UtilityEstimate {
        estimate: mean,
        standard_error: (var / n).sqrt(),
        tail_correction: kahan_sum(outcomes.iter().map(|o| o.tail)) / n,
        paths: config.paths,
        invariant_violations: outcomes.iter().map(|o| o.violations).sum(),
    }
}
