//! Solver and verifier for the infinite-horizon log-utility consumption
//! problem under proportional transaction costs.
//!
//! The crate computes the no-trade region and the shadow price through a
//! free-boundary ODE, reproduces the fractional `lambda^{1/3}` expansions of
//! its solution and of the value function to arbitrary order, and verifies
//! optimality and duality numerically: by solving the value ODE, by Monte
//! Carlo simulation of the reflected state and the optimal strategy, and by
//! martingale checks on the candidate dual density.

pub mod asymptotics;
pub mod freeboundary;
pub mod model;
pub mod rk;
pub mod series;
pub mod sim;
pub mod valuefn;

pub use asymptotics::{expand_c, expand_policy, expand_sbar, expand_value, ExpansionBundle};
pub use freeboundary::{policy_boundaries, solve_free_boundary, GSolution};
pub use model::{
    lambda_convention_convert, merton_value_frictionless, validate_params, Endowment, ModelParams,
    PolicyBoundaries, SpreadConvention,
};
pub use sim::{initial_state, mc_expected_utility, simulate_path, SimConfig};
pub use valuefn::{mc_dual_check, solve_w, value_at, w1_limit, ValueFunction};
