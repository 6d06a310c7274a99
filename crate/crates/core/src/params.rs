//! Model parameters, admissibility checks and derived constants.
//!
//! Every other module consumes a [`Params`], which can only be obtained by
//! running [`ModelParams::validate`]. Validation collects *all* violated
//! constraints instead of stopping at the first one.

use thiserror::Error;

/// Raw market, penalty and risk parameters.
///
/// Units: prices in currency/share, positions in shares, time in the same
/// unit as `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Permanent-impact coefficient gamma >= 0, price per share.
    pub gamma: f64,
    /// Temporary-impact coefficient eta > 0, price per (share/time).
    pub eta: f64,
    /// Fair-price volatility sigma > 0, price per sqrt(time).
    pub sigma: f64,
    /// Order-fill-uncertainty volatility m >= 0, shares per sqrt(time).
    pub m: f64,
    /// Terminal block-trade penalty coefficient beta > 0, price per share.
    pub beta: f64,
    /// Running-penalty weight lambda1 >= 0.
    pub lambda1: f64,
    /// Risk-aversion coefficient lambda2 >= 0.
    pub lambda2: f64,
    /// Committee target trading rate v_bar > 0, shares per time.
    pub v_bar: f64,
    /// Trading horizon T > 0.
    pub horizon: f64,
    /// Initial position, shares.
    pub x0: f64,
    /// Initial fair price s0 > 0.
    pub s0: f64,
}

/// Constants derived from an admissible parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// kappa = 2 m^2 (eta + lambda1).
    pub kappa: f64,
    /// Effective target rate v_bar^l = lambda1 v_bar / (eta + lambda1).
    pub v_bar_ell: f64,
    /// Characteristic trading rate omega = gamma sqrt(kappa lambda2) / (2(eta+lambda1)),
    /// the rate inside the hyperbolic functions of the closed form.
    pub rate_arg: f64,
}

/// One violated admissibility constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub constraint: &'static str,
    pub value: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: requires {} (got {})", self.field, self.constraint, self.value)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParamError {
    #[error("inadmissible parameters: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Inadmissible { violations: Vec<Violation> },
}

/// A validated, immutable parameter set plus derived constants.
///
/// Construction goes through [`ModelParams::validate`] only, so holding a
/// `Params` is proof of admissibility. Safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    model: ModelParams,
    derived: DerivedConstants,
}

impl ModelParams {
    /// Check all admissibility constraints; on success return the validated
    /// set with derived constants. Reports every violation, not just the first.
    pub fn validate(self) -> Result<Params, ParamError> {
        let mut violations = Vec::new();
        let mut check = |ok: bool, field: &'static str, constraint: &'static str, value: f64| {
            if !ok {
                violations.push(Violation { field, constraint, value });
            }
        };

        let finite = [
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("sigma", self.sigma),
            ("m", self.m),
            ("beta", self.beta),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("v_bar", self.v_bar),
            ("T", self.horizon),
            ("x0", self.x0),
            ("s0", self.s0),
        ];
        for (name, v) in finite {
            check(v.is_finite(), name, "finite value", v);
        }

        check(self.gamma >= 0.0, "gamma", "gamma >= 0", self.gamma);
        check(self.eta > 0.0, "eta", "eta > 0", self.eta);
        check(self.sigma > 0.0, "sigma", "sigma > 0", self.sigma);
        check(self.m >= 0.0, "m", "m >= 0", self.m);
        check(self.beta > 0.0, "beta", "beta > 0", self.beta);
        check(self.lambda1 >= 0.0, "lambda1", "lambda1 >= 0", self.lambda1);
        check(self.lambda2 >= 0.0, "lambda2", "lambda2 >= 0", self.lambda2);
        check(self.v_bar > 0.0, "v_bar", "v_bar > 0", self.v_bar);
        check(self.horizon > 0.0, "T", "T > 0", self.horizon);
        check(self.s0 > 0.0, "s0", "s0 > 0", self.s0);

        // Concavity of the value function needs beta > gamma/2.
        check(self.beta > self.gamma / 2.0, "beta", "beta > gamma/2", self.beta);

        // kappa*lambda2 < 1; vacuous when m = 0 (kappa = 0).
        let kappa = 2.0 * self.m * self.m * (self.eta + self.lambda1);
        if kappa > 0.0 {
            check(self.lambda2 < 1.0 / kappa, "lambda2", "lambda2 < 1/kappa", self.lambda2);
        }

        if !violations.is_empty() {
            return Err(ParamError::Inadmissible { violations });
        }

        let v_bar_ell = self.lambda1 * self.v_bar / (self.eta + self.lambda1);
        let rate_arg = self.gamma * (kappa * self.lambda2).sqrt() / (2.0 * (self.eta + self.lambda1));
        Ok(Params {
            model: self,
            derived: DerivedConstants { kappa, v_bar_ell, rate_arg },
        })
    }
}

impl Params {
    /// Test-only escape hatch: wrap a parameter set without admissibility
    /// checks, to exercise blow-up detection paths.
    #[cfg(test)]
    pub(crate) fn new_unchecked(model: ModelParams) -> Params {
        let kappa = 2.0 * model.m * model.m * (model.eta + model.lambda1);
        let v_bar_ell = model.lambda1 * model.v_bar / (model.eta + model.lambda1);
        let rate_arg = model.gamma * (kappa * model.lambda2).sqrt() / (2.0 * (model.eta + model.lambda1));
        Params { model, derived: DerivedConstants { kappa, v_bar_ell, rate_arg } }
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn gamma(&self) -> f64 {
        self.model.gamma
    }

    pub fn eta(&self) -> f64 {
        self.model.eta
    }

    pub fn sigma(&self) -> f64 {
        self.model.sigma
    }

    pub fn m(&self) -> f64 {
        self.model.m
    }

    pub fn beta(&self) -> f64 {
        self.model.beta
    }

    pub fn lambda1(&self) -> f64 {
        self.model.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.model.lambda2
    }

    pub fn v_bar(&self) -> f64 {
        self.model.v_bar
    }

    pub fn horizon(&self) -> f64 {
        self.model.horizon
    }

    pub fn x0(&self) -> f64 {
        self.model.x0
    }

    pub fn s0(&self) -> f64 {
        self.model.s0
    }

    /// eta + lambda1, the effective temporary-cost coefficient.
    pub fn eta_l1(&self) -> f64 {
        self.model.eta + self.model.lambda1
    }

    pub fn kappa(&self) -> f64 {
        self.derived.kappa
    }

    pub fn v_bar_ell(&self) -> f64 {
        self.derived.v_bar_ell
    }

    /// Characteristic trading rate omega.
    pub fn omega(&self) -> f64 {
        self.derived.rate_arg
    }

    /// Dimensionless risk ratio rho = kappa * lambda2, in [0, 1).
    pub fn rho(&self) -> f64 {
        self.derived.kappa * self.model.lambda2
    }

    /// Replace lambda2 so that kappa*lambda2 = rho; requires kappa > 0 for rho > 0.
    pub fn with_rho(&self, rho: f64) -> Result<Params, ParamError> {
        let mut m = self.model.clone();
        m.lambda2 = if rho == 0.0 {
            0.0
        } else {
            rho / self.derived.kappa // kappa = 0 yields inf, rejected by validate
        };
        m.validate()
    }
}
