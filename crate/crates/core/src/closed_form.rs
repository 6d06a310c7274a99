//! Closed-form Riccati coefficients, value function, optimal feedback
//! controls and asymptotic regimes.
//!
//! All hyperbolic ratios are evaluated with an exp(-theta) rescaling so that
//! theta = omega*(T-t) up to ~1e4 stays finite, and with expm1-based helpers
//! (sinh(theta)/theta and friends) so the kappa*lambda2 -> 0 and gamma -> 0
//! limits come out of the same expressions instead of a 0/0 branch.

use crate::params::Params;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ClosedFormError {
    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },
    #[error("early-stage constants undefined: gamma, m and lambda2 must all be positive")]
    DegenerateRegime,
}

/// Riccati coefficients evaluated at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyCoefficients {
    /// Evaluation time in [0, T].
    pub t: f64,
    /// Curvature coefficient a(t) < 0.
    pub a: f64,
    /// Linear coefficient b(t).
    pub b: f64,
    /// Constant coefficient c(t).
    pub c: f64,
    /// a(t) - gamma, computed in its own stable form (never as a subtraction).
    pub a_minus_gamma: f64,
    /// Scheduled liquidation target ell(T - t) = -b(t)/a(t), shares.
    pub ell: f64,
}

/// Optimal backward controls at one (t, x) point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardControls {
    /// Shifted control tied to B1: -m[(a-gamma) x + b].
    pub z1_tilde: f64,
    /// Shifted control tied to B2: identically zero.
    pub z2_tilde: f64,
    /// Raw control tied to B1 (entropic-risk BSDE component).
    pub z1: f64,
    /// Raw control tied to B2: -sigma x.
    pub z2: f64,
}

/// Late-stage approximants and early-stage constants of the policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRegime {
    /// Small-horizon approximant of ell(T - t) at the requested t.
    pub ell0: f64,
    /// Small-horizon approximant of a(t) at the requested t.
    pub a0: f64,
    /// Large-horizon limit of ell.
    pub ell_inf: f64,
    /// Large-horizon limit of a.
    pub a_inf: f64,
    /// Fixed point of the early-stage position dynamics, 2 lambda1 v_bar / gamma.
    pub x_bar_inf: f64,
}

/// Stable building blocks at one tau = T - t.
///
/// All fields carry an implicit exp(-theta) scaling:
/// sh = e^-th sinh(th), ch = e^-th cosh(th), shc = sh/th, hct = e^-th (cosh-1)/th,
/// hcc = e^-th (cosh-1)/th^2, dh = e^-th * D/(gamma r) continued to gamma*r = 0.
struct Kernel {
    tau: f64,
    theta: f64,
    sh: f64,
    ch: f64,
    shc: f64,
    hct: f64,
    hcc: f64,
    dh: f64,
    /// ln(dh), via ln_1p for accuracy near tau = 0.
    ln_dh: f64,
    r: f64,
    eps: f64,
}

impl Kernel {
    fn at_tau(p: &Params, tau: f64) -> Kernel {
        let a2 = 2.0 * p.eta_l1();
        let eps = p.rho();
        let r = eps.sqrt();
        let theta = p.omega() * tau;
        let p_eps = 2.0 * p.beta() * (1.0 - eps) - p.gamma();
        let (sh, ch, shc, hct, hcc, chm1) = if theta > 0.0 {
            let em2 = (-2.0 * theta).exp();
            let chm1 = (-2.0 * theta).exp_m1() / 2.0; // e^-th cosh - e^-th ... = (em2-1)/2
            let sh = -chm1; // (1 - em2)/2
            let ch = (1.0 + em2) / 2.0;
            let e1 = -(-theta).exp_m1(); // 1 - e^-theta
            (sh, ch, sh / theta, e1 * e1 / (2.0 * theta), (e1 / theta) * (e1 / theta) / 2.0, chm1)
        } else {
            (0.0, 1.0, 1.0, 0.0, 0.5, 0.0)
        };
        let dm1 = chm1 + p_eps * (tau / a2) * shc; // dh - 1
        Kernel { tau, theta, sh, ch, shc, hct, hcc, dh: 1.0 + dm1, ln_dh: dm1.ln_1p(), r, eps }
    }
}

fn coefficients_at_tau(p: &Params, t: f64, tau: f64) -> PolicyCoefficients {
    let k = Kernel::at_tau(p, tau);
    let a2 = 2.0 * p.eta_l1();
    let tb = 2.0 * p.beta();
    let tbg = tb - p.gamma();
    let l1v = p.lambda1() * p.v_bar();
    let m2 = p.m() * p.m();

    let pol_num = tbg * k.ch + tb * k.r * k.sh;
    let a = -pol_num / k.dh;
    let a_minus_gamma = -(tbg * k.shc * p.gamma() * k.tau / a2 + tb * k.ch) / k.dh;
    let sched_num = tbg * k.shc + tb * k.r * k.hct;
    let b = (2.0 * l1v * k.tau / a2) * sched_num / k.dh;
    let ell = if k.tau == 0.0 { 0.0 } else { (2.0 * l1v * k.tau / a2) * sched_num / pol_num };

    let rt = k.r * k.tau / a2;
    let c = 2.0 * l1v * l1v * (k.shc * k.tau / a2 - 4.0 * p.beta() * k.hcc * rt * rt) / k.dh
        + 0.5 * p.gamma() * m2 * (1.0 - 2.0 * k.eps) / (1.0 - k.eps) * k.tau
        - p.lambda1() * p.v_bar() * p.v_bar() * k.tau
        - m2 * p.eta_l1() / (1.0 - k.eps) * (k.theta + k.ln_dh);

    PolicyCoefficients { t, a, b, c, a_minus_gamma, ell }
}

fn check_range(p: &Params, t: f64) -> Result<(), ClosedFormError> {
    if !t.is_finite() || t < 0.0 || t > p.horizon() {
        return Err(ClosedFormError::OutOfRange { t, horizon: p.horizon() });
    }
    Ok(())
}

/// Evaluate a, b, c, a - gamma and ell(T - t) at time t.
pub fn eval_coefficients(p: &Params, t: f64) -> Result<PolicyCoefficients, ClosedFormError> {
    check_range(p, t)?;
    Ok(coefficients_at_tau(p, t, p.horizon() - t))
}

/// Coefficient evaluation without the [0, T] range check, for simulation loops
/// that already run on a validated grid.
pub(crate) fn coefficients_unchecked(p: &Params, t: f64) -> PolicyCoefficients {
    coefficients_at_tau(p, t, p.horizon() - t)
}

/// The coefficients in the lambda2 -> 0 limit, regardless of the set's lambda2.
pub fn risk_neutral_coefficients(p: &Params, t: f64) -> Result<PolicyCoefficients, ClosedFormError> {
    check_range(p, t)?;
    let tau = p.horizon() - t;
    let a2 = 2.0 * p.eta_l1();
    let p0 = 2.0 * p.beta() - p.gamma();
    let den = a2 + p0 * tau;
    let l1v = p.lambda1() * p.v_bar();
    let m2 = p.m() * p.m();
    let a = -p0 * a2 / den;
    let b = 2.0 * l1v * p0 * tau / den;
    let c = 2.0 * l1v * l1v * tau / den + (0.5 * p.gamma() * m2 - p.lambda1() * p.v_bar() * p.v_bar()) * tau
        - m2 * p.eta_l1() * (p0 * tau / a2).ln_1p();
    Ok(PolicyCoefficients {
        t,
        a,
        b,
        c,
        a_minus_gamma: a - p.gamma(),
        ell: p.v_bar_ell() * tau,
    })
}

/// a(t) evaluated through the tanh restatement; agrees with
/// [`eval_coefficients`] wherever both are finite (requires rho > 0).
pub fn coefficient_a_tanh_form(p: &Params, t: f64) -> Result<f64, ClosedFormError> {
    check_range(p, t)?;
    let eps = p.rho();
    let r = eps.sqrt();
    let th = (p.omega() * (p.horizon() - t)).tanh();
    let tb = 2.0 * p.beta();
    let g = p.gamma();
    let num = g * r * (tb * r * th + (tb - g));
    let den = (tb - g) * (1.0 - eps) * th + g * r * (1.0 - r * th);
    Ok(-num / den)
}

/// Optimal trading rate v*(t, x) = -(a x + b - 2 lambda1 v_bar) / (2(eta+lambda1)).
pub fn optimal_rate(p: &Params, t: f64, x: f64) -> Result<f64, ClosedFormError> {
    let k = eval_coefficients(p, t)?;
    Ok(rate_from_coefficients(p, &k, x))
}

pub(crate) fn rate_from_coefficients(p: &Params, k: &PolicyCoefficients, x: f64) -> f64 {
    -(k.a * x + k.b - 2.0 * p.lambda1() * p.v_bar()) / (2.0 * p.eta_l1())
}

/// Both algebraic forms of the optimal rate: the direct affine-feedback form
/// and the mean-reverting restatement v_bar^l - a (x - ell) / (2(eta+lambda1)).
pub fn optimal_rate_forms(p: &Params, t: f64, x: f64) -> Result<(f64, f64), ClosedFormError> {
    let k = eval_coefficients(p, t)?;
    let direct = rate_from_coefficients(p, &k, x);
    let anchored = p.v_bar_ell() - k.a * (x - k.ell) / (2.0 * p.eta_l1());
    Ok((direct, anchored))
}

/// Optimal backward controls at (t, x), both in shifted and raw form.
pub fn backward_controls(p: &Params, t: f64, x: f64) -> Result<BackwardControls, ClosedFormError> {
    let k = eval_coefficients(p, t)?;
    Ok(controls_from_coefficients(p, &k, x))
}

pub(crate) fn controls_from_coefficients(p: &Params, k: &PolicyCoefficients, x: f64) -> BackwardControls {
    let z1_tilde = -p.m() * (k.a_minus_gamma * x + k.b);
    let z1 = -(p.m() / (2.0 * p.eta_l1()))
        * ((p.eta() + 2.0 * p.lambda1()) * (k.a * x + k.b) + 2.0 * p.eta() * p.lambda1() * p.v_bar());
    BackwardControls { z1_tilde, z2_tilde: 0.0, z1, z2: -p.sigma() * x }
}

/// Value function w(t, x) = (a - gamma)/2 x^2 + b x + c.
pub fn value_function(p: &Params, t: f64, x: f64) -> Result<f64, ClosedFormError> {
    let k = eval_coefficients(p, t)?;
    Ok(value_from_coefficients(&k, x))
}

pub(crate) fn value_from_coefficients(k: &PolicyCoefficients, x: f64) -> f64 {
    0.5 * k.a_minus_gamma * x * x + k.b * x + k.c
}

/// Late-stage approximants at t plus the early-stage constants.
///
/// Errors with [`ClosedFormError::DegenerateRegime`] when gamma*m*lambda2 = 0,
/// where the early-stage constants are undefined.
pub fn asymptotics(p: &Params, t: f64) -> Result<AsymptoticRegime, ClosedFormError> {
    check_range(p, t)?;
    if p.gamma() <= 0.0 || p.m() <= 0.0 || p.lambda2() <= 0.0 {
        return Err(ClosedFormError::DegenerateRegime);
    }
    let tau = p.horizon() - t;
    let a2 = 2.0 * p.eta_l1();
    let tb = 2.0 * p.beta();
    let tbg = tb - p.gamma();
    let eps = p.rho();
    let r = eps.sqrt();
    let l1v = p.lambda1() * p.v_bar();
    // theta * r at horizon tau
    let thr = p.gamma() * p.m() * p.m() * p.lambda2() * tau;

    let ell0 = p.v_bar_ell() * tau * (tbg + p.beta() * thr) / (tbg + tb * thr);
    let a0 = -a2 * (tbg + tb * thr) / ((tbg - tb * eps) * tau + a2);
    let a_inf = -p.gamma() * r / (1.0 - r);
    let ell_inf = 2.0 * l1v / (p.gamma() * r);
    let x_bar_inf = 2.0 * l1v / p.gamma();
    Ok(AsymptoticRegime { ell0, a0, ell_inf, a_inf, x_bar_inf })
}

/// A validated parameter set together with its policy maps.
#[derive(Debug, Clone)]
pub struct FeedbackPolicy {
    params: Params,
}

impl FeedbackPolicy {
    pub fn new(params: Params) -> Self {
        FeedbackPolicy { params }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn coefficients(&self, t: f64) -> Result<PolicyCoefficients, ClosedFormError> {
        eval_coefficients(&self.params, t)
    }

    pub fn rate(&self, t: f64, x: f64) -> Result<f64, ClosedFormError> {
        optimal_rate(&self.params, t, x)
    }

    pub fn controls(&self, t: f64, x: f64) -> Result<BackwardControls, ClosedFormError> {
        backward_controls(&self.params, t, x)
    }

    pub fn value(&self, t: f64, x: f64) -> Result<f64, ClosedFormError> {
        value_function(&self.params, t, x)
    }
}
