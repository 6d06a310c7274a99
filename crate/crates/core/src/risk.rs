//! Entropic risk estimation, the risk-measure axiom suite on exact finite
//! trees, and the exponential-transform Monte Carlo representation of the
//! control objective.
//!
//! Sign conventions are pinned once here. The risk of an outcome xi is
//! R(xi) = (1/lambda2) ln E[exp(-lambda2 xi)], so R(xi + c) = R(xi) - c and a
//! sure amount c has risk -c. The objective of a Markov control is
//! J(t, x) = -(1/lambda2) ln E[exp(lambda2 (beta X(T)^2 + int phi))], the
//! exponential-martingale transform of the backward equation driven by
//! g = phi + lambda2/2 |Z|^2; under the optimal control J equals the
//! closed-form value function, which is what the keystone test asserts.

use crate::closed_form;
use crate::dynamics::{self, MarkovControl, SimError};
use crate::math::{log_mean_exp, mean_se, Z_99};
use crate::params::Params;
use rayon::prelude::*;
use thiserror::Error;

/// Stabilized exponent spread beyond which the tail is declared undersampled.
pub const EXPONENT_SPREAD_BOUND: f64 = 500.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RiskError {
    #[error("need at least 2 samples (got {0})")]
    TooFewSamples(usize),
    #[error("lambda2 must be positive for the entropic estimator (got {0})")]
    NonPositiveLambda(f64),
    #[error("non-finite sample encountered")]
    NonFinite,
    #[error("stabilized exponent spread {spread:.1} exceeds bound {bound:.1}; lambda2 too large for the scenario scale")]
    Overflow { spread: f64, bound: f64 },
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("axiom {axiom} violated on scenario {scenario}: deviation {deviation:.3e}")]
    AxiomViolation { axiom: &'static str, scenario: String, deviation: f64 },
}

/// A Monte Carlo estimate with its sampling uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Half-width of the confidence interval at `confidence`.
    pub half_width: f64,
    /// Confidence level of the half-width (default 0.99).
    pub confidence: f64,
    pub n_samples: usize,
    /// Log-sum-exp shift used (max stabilized exponent).
    pub shift: f64,
    /// Spread between the largest and smallest stabilized exponent.
    pub exponent_spread: f64,
    /// Effective sample size (sum w)^2 / sum w^2 of the exponential weights;
    /// small values signal that the tail dominating the estimate is
    /// undersampled and the estimate (and its standard error) cannot be
    /// trusted at this budget.
    pub effective_samples: f64,
    /// All samples identical: standard error zero by construction.
    pub degenerate: bool,
}

/// Running cost phi(x, v) = (eta+lambda1) v^2 + (gamma x - 2 lambda1 v_bar) v
/// - (gamma m^2 - lambda1 v_bar^2); the non-martingale part of the backward
/// driver, equal to minus the drift of the penalized P&L.
pub fn running_cost(p: &Params, x: f64, v: f64) -> f64 {
    p.eta_l1() * v * v + (p.gamma() * x - 2.0 * p.lambda1() * p.v_bar()) * v
        - (p.gamma() * p.m() * p.m() - p.lambda1() * p.v_bar() * p.v_bar())
}

/// Terminal cost beta x^2.
pub fn terminal_cost(p: &Params, x: f64) -> f64 {
    p.beta() * x * x
}

/// The quadratic cost functional (running + terminal) of a parameter set.
#[derive(Debug, Clone, Copy)]
pub struct CostFunctional<'a> {
    p: &'a Params,
}

impl<'a> CostFunctional<'a> {
    pub fn new(p: &'a Params) -> Self {
        CostFunctional { p }
    }

    pub fn running(&self, x: f64, v: f64) -> f64 {
        running_cost(self.p, x, v)
    }

    pub fn terminal(&self, x: f64) -> f64 {
        terminal_cost(self.p, x)
    }

    /// Leading v^2 coefficient, always eta + lambda1 > 0.
    pub fn quadratic_coefficient(&self) -> f64 {
        self.p.eta_l1()
    }
}

/// Entropic risk (1/lambda2) ln mean(exp(-lambda2 xi)) over samples of xi,
/// with max-shift stabilization and a delta-method standard error.
pub fn entropic_risk(samples: &[f64], lambda2: f64) -> Result<RiskEstimate, RiskError> {
    if samples.len() < 2 {
        return Err(RiskError::TooFewSamples(samples.len()));
    }
    if !(lambda2 > 0.0) {
        return Err(RiskError::NonPositiveLambda(lambda2));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(RiskError::NonFinite);
    }
    let u: Vec<f64> = samples.iter().map(|&x| -lambda2 * x).collect();
    estimate_from_exponents(&u, lambda2, 1.0)
}

/// Shared tail: given exponents u, return sign/lambda-scaled log-mean-exp with
/// the delta-method standard error. estimate = sign * LME(u) / lambda.
fn estimate_from_exponents(u: &[f64], lambda: f64, sign: f64) -> Result<RiskEstimate, RiskError> {
    let (lme, shift, spread) = log_mean_exp(u);
    if spread > EXPONENT_SPREAD_BOUND {
        return Err(RiskError::Overflow { spread, bound: EXPONENT_SPREAD_BOUND });
    }
    let n = u.len();
    let weights: Vec<f64> = u.iter().map(|&x| (x - shift).exp()).collect();
    let (w_mean, w_se) = mean_se(&weights);
    let degenerate = w_se == 0.0;
    let std_error = w_se / (w_mean * lambda);
    let estimate = sign * lme / lambda;
    if !estimate.is_finite() {
        return Err(RiskError::NonFinite);
    }
    let sum_w: f64 = weights.iter().sum();
    let sum_w2: f64 = weights.iter().map(|w| w * w).sum();
    Ok(RiskEstimate {
        estimate,
        std_error,
        half_width: Z_99 * std_error,
        confidence: 0.99,
        n_samples: n,
        shift,
        exponent_spread: spread,
        effective_samples: sum_w * sum_w / sum_w2,
        degenerate,
    })
}

/// Monte Carlo estimate of the objective J(t, x; ctrl): simulate X under the
/// control from (t, x), accumulate cost = beta X(T)^2 + int phi by trapezoid,
/// and apply the exponential transform. lambda2 = 0 falls back to the plain
/// mean of -cost.
pub fn objective_estimate(
    p: &Params,
    ctrl: &MarkovControl,
    t: f64,
    x: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<RiskEstimate, RiskError> {
    if n_paths < 2 {
        return Err(RiskError::TooFewSamples(n_paths));
    }
    let table = dynamics::RateTable::build(p, ctrl, t, n_steps)?;
    let costs: Result<Vec<f64>, SimError> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path_index| {
            let mut rng = dynamics::path_rng(seed, path_index);
            let run = dynamics::integrate_with_table(p, &table, x, &mut rng, |x, v| running_cost(p, x, v))?;
            Ok(terminal_cost(p, run.x_terminal) + run.integral)
        })
        .collect();
    let costs = costs?;
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(RiskError::NonFinite);
    }
    let lambda2 = p.lambda2();
    if lambda2 == 0.0 {
        let neg: Vec<f64> = costs.iter().map(|c| -c).collect();
        let (mean, se) = mean_se(&neg);
        return Ok(RiskEstimate {
            estimate: mean,
            std_error: se,
            half_width: Z_99 * se,
            confidence: 0.99,
            n_samples: costs.len(),
            shift: 0.0,
            exponent_spread: 0.0,
            effective_samples: costs.len() as f64,
            degenerate: se == 0.0,
        });
    }
    let u: Vec<f64> = costs.iter().map(|&c| lambda2 * c).collect();
    estimate_from_exponents(&u, lambda2, -1.0)
}

/// One row of a suboptimality scan.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub tag: String,
    pub estimate: RiskEstimate,
    /// Closed-form value w(t, x) the estimate is compared against.
    pub value_reference: f64,
    /// w(t, x) - J; nonnegative up to noise, smallest for the optimal control.
    pub gap: f64,
}

/// Estimate J for each control in the family and report gaps to the
/// closed-form value function. Every row runs on the same driving noise
/// (common random numbers), so gap orderings across the family are sharp.
pub fn suboptimality_scan(
    p: &Params,
    family: &[MarkovControl],
    t: f64,
    x: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<ScanRow>, RiskError> {
    let w = closed_form::value_function(p, t, x).map_err(|_| RiskError::NonFinite)?;
    family
        .iter()
        .map(|ctrl| {
            let est = objective_estimate(p, ctrl, t, x, n_paths, n_steps, seed)?;
            Ok(ScanRow { tag: ctrl.tag(), estimate: est, value_reference: w, gap: w - est.estimate })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Axiom suite on exact finite trees (no Monte Carlo error anywhere).
// ---------------------------------------------------------------------------

/// A finite single-stage lottery: outcomes with probabilities summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Lottery {
    /// (probability, value) pairs.
    pub outcomes: Vec<(f64, f64)>,
}

impl Lottery {
    pub fn new(outcomes: Vec<(f64, f64)>) -> Self {
        let total: f64 = outcomes.iter().map(|o| o.0).sum();
        assert!((total - 1.0).abs() < 1e-12, "probabilities must sum to 1");
        Lottery { outcomes }
    }

    /// Map outcome values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Lottery {
        Lottery { outcomes: self.outcomes.iter().map(|&(p, v)| (p, f(v))).collect() }
    }
}

/// Exact entropic risk of a lottery: (1/lambda) ln sum p_i exp(-lambda v_i).
pub fn entropic_exact(l: &Lottery, lambda: f64) -> f64 {
    assert!(lambda > 0.0);
    let mx = l.outcomes.iter().map(|o| -lambda * o.1).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = l.outcomes.iter().map(|&(p, v)| p * (-lambda * v - mx).exp()).sum();
    (mx + s.ln()) / lambda
}

/// Solution flow of the risk BSDE from an intermediate-time value zeta:
/// (1/lambda) ln sum p_b exp(+lambda zeta_b). Composing the flow over the
/// later interval with the terminal map -xi reproduces the risk in one step.
pub fn entropic_flow(values: &[(f64, f64)], lambda: f64) -> f64 {
    assert!(lambda > 0.0);
    let mx = values.iter().map(|o| lambda * o.1).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = values.iter().map(|&(p, v)| p * (lambda * v - mx).exp()).sum();
    (mx + s.ln()) / lambda
}

/// A two-stage scenario tree: first-stage branches, each carrying a
/// conditional second-stage lottery over terminal values.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageTree {
    pub branches: Vec<(f64, Lottery)>,
}

impl TwoStageTree {
    pub fn new(branches: Vec<(f64, Lottery)>) -> Self {
        let total: f64 = branches.iter().map(|b| b.0).sum();
        assert!((total - 1.0).abs() < 1e-12, "branch probabilities must sum to 1");
        TwoStageTree { branches }
    }

    /// Flatten to the unconditional terminal lottery.
    pub fn flatten(&self) -> Lottery {
        let mut outcomes = Vec::new();
        for (pb, lot) in &self.branches {
            for &(q, v) in &lot.outcomes {
                outcomes.push((pb * q, v));
            }
        }
        Lottery { outcomes }
    }

    /// Risk computed by composing the flow: inner conditional risks at the
    /// intermediate stage, then the flow over the first stage.
    pub fn composed_risk(&self, lambda: f64) -> f64 {
        let inner: Vec<(f64, f64)> =
            self.branches.iter().map(|(pb, lot)| (*pb, entropic_exact(lot, lambda))).collect();
        entropic_flow(&inner, lambda)
    }
}

/// Per-axiom worst-case margins over the battery (deterministic arithmetic,
/// no statistical tolerance; equalities allowed a few ulps).
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub lambda2: f64,
    /// min over scenarios of alpha R1 + (1-alpha) R2 - R(mix) (>= 0).
    pub convexity_margin: f64,
    /// min over ordered pairs of R(smaller) - R(larger) (>= 0).
    pub monotonicity_margin: f64,
    /// max |R(xi + c) - (R(xi) - c)| in units of the scenario scale.
    pub translation_max_dev: f64,
    /// max |composed - direct| over two-stage trees, scaled.
    pub semigroup_max_dev: f64,
    pub scenarios: usize,
}

/// Battery of deterministic scenarios for the axiom suite.
pub fn default_battery() -> (Vec<(Lottery, Lottery)>, Vec<TwoStageTree>) {
    let pairs = vec![
        (
            Lottery::new(vec![(0.5, 0.0), (0.5, 1.0)]),
            Lottery::new(vec![(0.5, 2.0), (0.5, -1.0)]),
        ),
        (
            Lottery::new(vec![(0.3, -4.0), (0.7, 2.5)]),
            Lottery::new(vec![(0.3, 1.0), (0.7, 1.0)]),
        ),
        (
            Lottery::new(vec![(0.2, 10.0), (0.5, 0.1), (0.3, -3.0)]),
            Lottery::new(vec![(0.2, -0.5), (0.5, 4.0), (0.3, 0.0)]),
        ),
    ];
    let trees = vec![
        TwoStageTree::new(vec![
            (0.4, Lottery::new(vec![(0.5, 0.0), (0.5, 1.0)])),
            (0.6, Lottery::new(vec![(0.25, -2.0), (0.75, 3.0)])),
        ]),
        TwoStageTree::new(vec![
            (0.1, Lottery::new(vec![(1.0, 5.0)])),
            (0.55, Lottery::new(vec![(0.5, -1.0), (0.5, -0.5)])),
            (0.35, Lottery::new(vec![(0.9, 0.2), (0.1, 8.0)])),
        ]),
    ];
    (pairs, trees)
}

/// Run the axiom suite at the given risk aversion over a scenario battery.
/// Any violation beyond a few ulps is a hard error.
pub fn axiom_suite(
    lambda2: f64,
    pairs: &[(Lottery, Lottery)],
    trees: &[TwoStageTree],
) -> Result<AxiomReport, RiskError> {
    if !(lambda2 > 0.0) {
        return Err(RiskError::NonPositiveLambda(lambda2));
    }
    let ulp_slack = 32.0 * f64::EPSILON;
    let mut report = AxiomReport {
        lambda2,
        convexity_margin: f64::INFINITY,
        monotonicity_margin: f64::INFINITY,
        translation_max_dev: 0.0,
        semigroup_max_dev: 0.0,
        scenarios: pairs.len() + trees.len(),
    };

    for (i, (l1, l2)) in pairs.iter().enumerate() {
        assert_eq!(
            l1.outcomes.iter().map(|o| o.0).collect::<Vec<_>>(),
            l2.outcomes.iter().map(|o| o.0).collect::<Vec<_>>(),
            "convexity pairs must share the outcome space"
        );
        let r1 = entropic_exact(l1, lambda2);
        let r2 = entropic_exact(l2, lambda2);
        let scale = 1.0f64.max(r1.abs()).max(r2.abs());

        // convexity over a grid of mixing weights
        for alpha in [0.25, 0.5, 0.75] {
            let mix = Lottery {
                outcomes: l1
                    .outcomes
                    .iter()
                    .zip(&l2.outcomes)
                    .map(|(&(p, v1), &(_, v2))| (p, alpha * v1 + (1.0 - alpha) * v2))
                    .collect(),
            };
            let margin = alpha * r1 + (1.0 - alpha) * r2 - entropic_exact(&mix, lambda2);
            if margin < -ulp_slack * scale {
                return Err(RiskError::AxiomViolation {
                    axiom: "convexity",
                    scenario: format!("pair {i}, alpha {alpha}"),
                    deviation: margin,
                });
            }
            report.convexity_margin = report.convexity_margin.min(margin);
        }

        // decreasing monotonicity: dominate l1 pointwise, risk must not increase
        let bump = 0.7;
        let bumped = l1.map(|v| v + bump);
        let margin = entropic_exact(l1, lambda2) - entropic_exact(&bumped, lambda2);
        // for the entropic measure this margin equals the bump exactly
        if margin < bump - ulp_slack * scale.max(1.0) {
            return Err(RiskError::AxiomViolation {
                axiom: "monotonicity",
                scenario: format!("pair {i} bumped by {bump}"),
                deviation: margin - bump,
            });
        }
        report.monotonicity_margin = report.monotonicity_margin.min(margin);

        // translation with the entropic sign: R(xi + c) = R(xi) - c
        for c in [-3.0, 0.25, 11.0] {
            let shifted = l1.map(|v| v + c);
            let dev = (entropic_exact(&shifted, lambda2) - (r1 - c)).abs();
            let tscale = scale.max(c.abs());
            if dev > ulp_slack * tscale {
                return Err(RiskError::AxiomViolation {
                    axiom: "translation",
                    scenario: format!("pair {i}, shift {c}"),
                    deviation: dev,
                });
            }
            report.translation_max_dev = report.translation_max_dev.max(dev / tscale);
        }
    }

    for (i, tree) in trees.iter().enumerate() {
        let direct = entropic_exact(&tree.flatten(), lambda2);
        let composed = tree.composed_risk(lambda2);
        let scale = 1.0f64.max(direct.abs());
        let dev = (composed - direct).abs();
        if dev > ulp_slack * scale {
            return Err(RiskError::AxiomViolation {
                axiom: "semigroup",
                scenario: format!("tree {i}"),
                deviation: dev,
            });
        }
        report.semigroup_max_dev = report.semigroup_max_dev.max(dev / scale);
    }

    Ok(report)
}
