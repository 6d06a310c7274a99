//! Optimal liquidation under a dynamic entropic risk adjustment.
//!
//! The library evaluates the closed-form feedback policy for unwinding a
//! position with permanent/temporary price impact, uncertain order fills and
//! an entropic (exponential) risk adjustment of the terminal P&L, and ships
//! the machinery to verify every formula independently:
//!
//! - [`params`] — model parameters, admissibility checks, derived constants.
//! - [`closed_form`] — Riccati coefficients a, b, c, the value function,
//!   optimal trading rate and backward controls, asymptotic regimes.
//! - [`hjb`] — Hamiltonian, its maximizer, a pointwise HJB residual checker
//!   and a 4th-order backward Riccati integrator used as an ODE oracle.
//! - [`dynamics`] — Euler–Maruyama simulation of position/price paths, P&L
//!   accumulators and the closed-loop forward-backward system.
//! - [`risk`] — entropic risk estimation, the risk-measure axiom suite and
//!   the exponential-transform Monte Carlo estimate of the control objective.

pub mod closed_form;
pub mod dynamics;
pub mod hjb;
pub mod math;
pub mod params;
pub mod risk;

pub use params::{DerivedConstants, ModelParams, ParamError, Params};
