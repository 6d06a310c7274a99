//! Forward simulation of position, prices and P&L under Markov feedback
//! controls, plus the closed-loop system including the backward component Y.
//!
//! Conventions, shared by every consumer in this crate:
//! - uniform Euler–Maruyama steps; X and S driven by the same dB1;
//! - dt-integrals accumulate by trapezoid, Brownian integrals by left-point
//!   (Ito) sums — mixing them any other way leaves an O(1) quadratic-variation
//!   offset between the two P&L accumulators;
//! - every path owns a counter-based RNG substream keyed by its index, so
//!   ensembles are reproducible independent of worker count.

use crate::closed_form::{self, PolicyCoefficients};
use crate::params::Params;
use crate::risk;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("state became non-finite at step {step} (t={t}): {what}")]
    NonFinite { step: usize, t: f64, what: &'static str },
    #[error("need at least 2 steps (got {0})")]
    TooFewSteps(usize),
}

/// Deterministic Markov feedback rule (t, x) -> trading rate.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkovControl {
    /// The closed-form optimal feedback rate.
    Optimal,
    /// factor * v*(t, x).
    ScaledOptimal { factor: f64 },
    /// v*(t, x) + offset.
    OffsetOptimal { offset: f64 },
    /// Constant rate.
    Constant { rate: f64 },
}

impl MarkovControl {
    pub fn rate(&self, p: &Params, t: f64, x: f64) -> f64 {
        match self {
            MarkovControl::Optimal => {
                let k = closed_form::coefficients_unchecked(p, t);
                closed_form::rate_from_coefficients(p, &k, x)
            }
            MarkovControl::ScaledOptimal { factor } => {
                let k = closed_form::coefficients_unchecked(p, t);
                factor * closed_form::rate_from_coefficients(p, &k, x)
            }
            MarkovControl::OffsetOptimal { offset } => {
                let k = closed_form::coefficients_unchecked(p, t);
                closed_form::rate_from_coefficients(p, &k, x) + offset
            }
            MarkovControl::Constant { rate } => *rate,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            MarkovControl::Optimal => "optimal".into(),
            MarkovControl::ScaledOptimal { factor } => format!("scaled_{factor}"),
            MarkovControl::OffsetOptimal { offset } => format!("offset_{offset}"),
            MarkovControl::Constant { rate } => format!("constant_{rate}"),
        }
    }

    /// The rule frozen at time t as v = slope * x + intercept; every variant
    /// is affine in x, which lets simulation loops precompute a per-node table
    /// instead of re-evaluating the closed form on each step.
    pub fn affine_at(&self, p: &Params, t: f64) -> (f64, f64) {
        match self {
            MarkovControl::Constant { rate } => (0.0, *rate),
            _ => {
                let k = closed_form::coefficients_unchecked(p, t);
                let a2 = 2.0 * p.eta_l1();
                let slope = -k.a / a2;
                let intercept = -(k.b - 2.0 * p.lambda1() * p.v_bar()) / a2;
                match self {
                    MarkovControl::Optimal => (slope, intercept),
                    MarkovControl::ScaledOptimal { factor } => (factor * slope, factor * intercept),
                    MarkovControl::OffsetOptimal { offset } => (slope, intercept + offset),
                    MarkovControl::Constant { .. } => unreachable!(),
                }
            }
        }
    }
}

/// RNG substream for one path: same (seed, path_index) always yields the same
/// draws, regardless of how many paths run in parallel.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// One simulated trajectory on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub times: Vec<f64>,
    /// Position, shares.
    pub x: Vec<f64>,
    /// Fair price.
    pub s: Vec<f64>,
    /// Transacted price s - eta * v.
    pub s_tilde: Vec<f64>,
    /// Control rate applied at each node.
    pub v: Vec<f64>,
    /// P&L accumulated from its definition (mark-to-market + transaction costs).
    pub pi0_direct: Vec<f64>,
    /// P&L accumulated from the integrated closed expression.
    pub pi0_closed: Vec<f64>,
    /// Backward component along the path; only populated by the closed loop.
    pub y: Option<Vec<f64>>,
    /// Brownian increments driving the position.
    pub db1: Vec<f64>,
    /// Brownian increments driving the price.
    pub db2: Vec<f64>,
    /// Y(T) + beta X(T)^2, recorded by the closed loop.
    pub terminal_mismatch: Option<f64>,
}

impl SimPath {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub const CSV_HEADER: &'static str = "path_id,t,X,S,S_tilde,v,Pi0_direct,Pi0_closed,Y";

    /// Long-format CSV rows (with a leading path id), 17 significant digits.
    pub fn write_csv_rows(&self, path_id: usize, out: &mut String) {
        use std::fmt::Write;
        for i in 0..self.times.len() {
            let y = self.y.as_ref().map_or(f64::NAN, |y| y[i]);
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                path_id,
                self.times[i],
                self.x[i],
                self.s[i],
                self.s_tilde[i],
                self.v[i],
                self.pi0_direct[i],
                self.pi0_closed[i],
                y
            )
            .unwrap();
        }
    }
}

struct StepState {
    x: f64,
    s: f64,
    v: f64,
    /// Running value of the direct transaction-cost integral.
    direct_int: f64,
    /// Trapezoid accumulator for int v^2 dt.
    quad_v2: f64,
    /// Ito sum of v dB1.
    int_v_db1: f64,
    /// Ito sum of X dB2.
    int_x_db2: f64,
}

fn check_finite(v: f64, step: usize, t: f64, what: &'static str) -> Result<(), SimError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SimError::NonFinite { step, t, what })
    }
}

/// Euler–Maruyama simulation of (X, S) under `ctrl` over [0, T], with both
/// P&L accumulators filled. Identical (seed, path_index) gives a bit-identical
/// path.
pub fn simulate_forward(
    p: &Params,
    ctrl: &MarkovControl,
    n_steps: usize,
    seed: u64,
    path_index: u64,
) -> Result<SimPath, SimError> {
    simulate_inner(p, ctrl, n_steps, &mut path_rng(seed, path_index), false)
}

/// Closed-loop simulation under the optimal control, integrating the backward
/// component forward from Y(0) = w(0, x0) with dY = g dt - Z1 dB1 - Z2 dB2.
/// Records the terminal mismatch Y(T) + beta X(T)^2.
pub fn simulate_closed_loop(p: &Params, n_steps: usize, seed: u64, path_index: u64) -> Result<SimPath, SimError> {
    simulate_inner(p, &MarkovControl::Optimal, n_steps, &mut path_rng(seed, path_index), true)
}

/// As [`simulate_closed_loop`] but driven by caller-supplied increments
/// (used for common-random-number refinement studies).
pub fn simulate_closed_loop_with_increments(p: &Params, db1: &[f64], db2: &[f64]) -> Result<SimPath, SimError> {
    assert_eq!(db1.len(), db2.len());
    simulate_core(p, &MarkovControl::Optimal, db1.len(), true, Some((db1, db2)), &mut None)
}

/// As [`simulate_forward`] with caller-supplied increments.
pub fn simulate_forward_with_increments(
    p: &Params,
    ctrl: &MarkovControl,
    db1: &[f64],
    db2: &[f64],
) -> Result<SimPath, SimError> {
    assert_eq!(db1.len(), db2.len());
    simulate_core(p, ctrl, db1.len(), false, Some((db1, db2)), &mut None)
}

fn simulate_inner(
    p: &Params,
    ctrl: &MarkovControl,
    n_steps: usize,
    rng: &mut ChaCha12Rng,
    with_backward: bool,
) -> Result<SimPath, SimError> {
    simulate_core(p, ctrl, n_steps, with_backward, None, &mut Some(rng))
}

fn simulate_core(
    p: &Params,
    ctrl: &MarkovControl,
    n_steps: usize,
    with_backward: bool,
    increments: Option<(&[f64], &[f64])>,
    rng: &mut Option<&mut ChaCha12Rng>,
) -> Result<SimPath, SimError> {
    if n_steps < 2 {
        return Err(SimError::TooFewSteps(n_steps));
    }
    let n = n_steps;
    let dt = p.horizon() / n as f64;
    let sq = dt.sqrt();
    let (x0, s0) = (p.x0(), p.s0());
    let mut path = SimPath {
        times: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
        s: Vec::with_capacity(n + 1),
        s_tilde: Vec::with_capacity(n + 1),
        v: Vec::with_capacity(n + 1),
        pi0_direct: Vec::with_capacity(n + 1),
        pi0_closed: Vec::with_capacity(n + 1),
        y: None,
        db1: Vec::with_capacity(n),
        db2: Vec::with_capacity(n),
        terminal_mismatch: None,
    };

    let mut st = StepState {
        x: x0,
        s: s0,
        v: ctrl.rate(p, 0.0, x0),
        direct_int: 0.0,
        quad_v2: 0.0,
        int_v_db1: 0.0,
        int_x_db2: 0.0,
    };
    let mut y_path = Vec::new();
    let mut y = 0.0;
    if with_backward {
        y = closed_form::value_function(p, 0.0, x0).expect("t=0 in range");
        y_path.reserve(n + 1);
        y_path.push(y);
    }

    path.times.push(0.0);
    path.x.push(st.x);
    path.s.push(st.s);
    path.s_tilde.push(st.s - p.eta() * st.v);
    path.v.push(st.v);
    path.pi0_direct.push(0.0);
    path.pi0_closed.push(0.0);

    let (gamma, eta, sigma, m) = (p.gamma(), p.eta(), p.sigma(), p.m());
    for i in 0..n {
        let t = i as f64 * dt;
        let t_next = if i + 1 == n { p.horizon() } else { (i + 1) as f64 * dt };
        let (db1, db2) = match increments {
            Some((a, b)) => (a[i], b[i]),
            None => {
                let r = rng.as_mut().expect("rng required without increments");
                let z1: f64 = r.sample(StandardNormal);
                let z2: f64 = r.sample(StandardNormal);
                (z1 * sq, z2 * sq)
            }
        };

        let s_tilde = st.s - eta * st.v;
        let f_dt = -(s0 - s_tilde) * st.v;

        let coeffs_here: Option<PolicyCoefficients> =
            if with_backward { Some(closed_form::coefficients_unchecked(p, t)) } else { None };

        let x_next = st.x - st.v * dt + m * db1;
        let s_next = st.s - gamma * st.v * dt + gamma * m * db1 + sigma * db2;
        check_finite(x_next, i, t, "position X")?;
        check_finite(s_next, i, t, "price S")?;
        let v_next = ctrl.rate(p, t_next, x_next);
        check_finite(v_next, i, t, "control rate v")?;
        let s_tilde_next = s_next - eta * v_next;
        let f_dt_next = -(s0 - s_tilde_next) * v_next;

        st.direct_int += 0.5 * (f_dt + f_dt_next) * dt + m * (s0 - s_tilde) * db1;
        st.quad_v2 += 0.5 * (st.v * st.v + v_next * v_next) * dt;
        st.int_v_db1 += st.v * db1;
        st.int_x_db2 += st.x * db2;

        if let Some(k) = coeffs_here {
            let ctrl_b = closed_form::controls_from_coefficients(p, &k, st.x);
            let g = risk::running_cost(p, st.x, st.v)
                + 0.5 * p.lambda2() * (ctrl_b.z1_tilde * ctrl_b.z1_tilde + ctrl_b.z2_tilde * ctrl_b.z2_tilde);
            y += g * dt - ctrl_b.z1_tilde * db1 - ctrl_b.z2_tilde * db2;
            check_finite(y, i, t, "backward component Y")?;
            y_path.push(y);
        }

        st.x = x_next;
        st.s = s_next;
        st.v = v_next;

        let pi_direct = st.x * (st.s - s0) + st.direct_int;
        let pi_closed = 0.5 * gamma * (st.x * st.x - x0 * x0) + 0.5 * gamma * m * m * t_next
            - eta * st.quad_v2
            + eta * m * st.int_v_db1
            + sigma * st.int_x_db2;

        path.times.push(t_next);
        path.x.push(st.x);
        path.s.push(st.s);
        path.s_tilde.push(s_tilde_next);
        path.v.push(st.v);
        path.pi0_direct.push(pi_direct);
        path.pi0_closed.push(pi_closed);
        path.db1.push(db1);
        path.db2.push(db2);
    }

    if with_backward {
        let x_t = st.x;
        path.terminal_mismatch = Some(y + p.beta() * x_t * x_t);
        path.y = Some(y_path);
    }
    Ok(path)
}

/// Max over the grid of |Pi0_direct - Pi0_closed|.
pub fn pnl_identity_check(path: &SimPath) -> f64 {
    path.pi0_direct
        .iter()
        .zip(&path.pi0_closed)
        .fold(0.0f64, |acc, (d, c)| acc.max((d - c).abs()))
}

/// Terminal state and a trapezoid-accumulated integral of `integrand(x, v)`
/// along one simulated path; the lean runner behind the Monte Carlo
/// estimators (no per-node storage).
pub struct PathIntegral {
    pub x_terminal: f64,
    pub integral: f64,
}

pub fn integrate_along_path(
    p: &Params,
    ctrl: &MarkovControl,
    t_start: f64,
    x_start: f64,
    n_steps: usize,
    rng: &mut ChaCha12Rng,
    integrand: impl Fn(f64, f64) -> f64,
) -> Result<PathIntegral, SimError> {
    let table = RateTable::build(p, ctrl, t_start, n_steps)?;
    integrate_with_table(p, &table, x_start, rng, integrand)
}

/// Per-node frozen affine control rules on a uniform grid, shared across the
/// paths of one estimate.
pub struct RateTable {
    dt: f64,
    /// v_i(x) = nodes[i].0 * x + nodes[i].1
    nodes: Vec<(f64, f64)>,
}

impl RateTable {
    pub fn build(p: &Params, ctrl: &MarkovControl, t_start: f64, n_steps: usize) -> Result<RateTable, SimError> {
        if n_steps < 2 {
            return Err(SimError::TooFewSteps(n_steps));
        }
        let dt = (p.horizon() - t_start) / n_steps as f64;
        let nodes = (0..=n_steps)
            .map(|i| {
                let t = if i == n_steps { p.horizon() } else { t_start + i as f64 * dt };
                ctrl.affine_at(p, t)
            })
            .collect();
        Ok(RateTable { dt, nodes })
    }
}

pub fn integrate_with_table(
    p: &Params,
    table: &RateTable,
    x_start: f64,
    rng: &mut ChaCha12Rng,
    integrand: impl Fn(f64, f64) -> f64,
) -> Result<PathIntegral, SimError> {
    let n_steps = table.nodes.len() - 1;
    let dt = table.dt;
    let sq = dt.sqrt();
    let m = p.m();
    let mut x = x_start;
    let (sl0, ic0) = table.nodes[0];
    let mut v = sl0 * x + ic0;
    let mut f = integrand(x, v);
    let mut acc = 0.0;
    for i in 0..n_steps {
        let z: f64 = rng.sample(StandardNormal);
        let x_next = x - v * dt + m * z * sq;
        let (sl, ic) = table.nodes[i + 1];
        let v_next = sl * x_next + ic;
        let f_next = integrand(x_next, v_next);
        acc += 0.5 * (f + f_next) * dt;
        x = x_next;
        v = v_next;
        f = f_next;
    }
    if !(x.is_finite() && acc.is_finite()) {
        return Err(SimError::NonFinite { step: n_steps, t: p.horizon(), what: "path integral" });
    }
    Ok(PathIntegral { x_terminal: x, integral: acc })
}
