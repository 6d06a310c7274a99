//! Flat `key = value` configuration files with `#` comments. Unknown keys are
//! hard errors so parameter-name typos cannot silently fall back to defaults.

use execrisk::{ModelParams, ParamError, Params};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config key `{key}`: cannot parse `{value}` as {ty}")]
    BadValue { key: String, value: String, ty: &'static str },
    #[error("config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Experiment settings: model parameters, sweep, grids, Monte Carlo budget
/// and output destination.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    /// Risk ratio rho = kappa*lambda2 for single-run commands.
    pub rho: f64,
    /// Sweep values for coeffs/schedule/verify.
    pub rho_list: Vec<f64>,
    /// Absolute lambda2 escape hatch; overrides `rho` when set.
    pub lambda2_abs: Option<f64>,
    pub time_points: usize,
    pub x_points: usize,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    /// 0 means "all available cores".
    pub workers: usize,
    pub out_dir: PathBuf,
    /// How many full paths the simulate command writes to CSV.
    pub write_paths: usize,
    /// Echo of every key = value pair that produced this config.
    pub echo: BTreeMap<String, String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        // desk-scale defaults behind the figures
        ExperimentConfig {
            model: ModelParams {
                gamma: 2.5e-7,
                eta: 25e-6,
                sigma: 0.5,
                m: 2e6,
                beta: 2.5e-3,
                lambda1: 1e-4,
                lambda2: 0.0, // resolved from rho at build time
                v_bar: 1.0,
                horizon: 5.0,
                x0: 1e6,
                s0: 10.0,
            },
            rho: 0.5,
            rho_list: vec![0.0, 0.1, 0.5, 0.9],
            lambda2_abs: None,
            time_points: 501,
            x_points: 201,
            paths: 20_000,
            steps: 8192,
            seed: 1,
            workers: 0,
            out_dir: PathBuf::from("out"),
            write_paths: 10,
            echo: BTreeMap::new(),
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into(), ty: "number" })
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse::<usize>()
        .map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into(), ty: "integer" })
}

impl ExperimentConfig {
    pub fn from_file(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: line_no, text: raw.trim().into() })?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(ConfigError::Syntax { line: line_no, text: raw.trim().into() });
            }
            cfg.apply(key, value, line_no)?;
            cfg.echo.insert(key.to_string(), value.to_string());
        }
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        match key {
            "gamma" => self.model.gamma = parse_f64(key, value)?,
            "eta" => self.model.eta = parse_f64(key, value)?,
            "sigma" => self.model.sigma = parse_f64(key, value)?,
            "m" => self.model.m = parse_f64(key, value)?,
            "beta" => self.model.beta = parse_f64(key, value)?,
            "lambda1" => self.model.lambda1 = parse_f64(key, value)?,
            "lambda2" => self.lambda2_abs = Some(parse_f64(key, value)?),
            "v_bar" => self.model.v_bar = parse_f64(key, value)?,
            "T" => self.model.horizon = parse_f64(key, value)?,
            "x0" => self.model.x0 = parse_f64(key, value)?,
            "s0" => self.model.s0 = parse_f64(key, value)?,
            "rho" => self.rho = parse_f64(key, value)?,
            "rho_list" => {
                self.rho_list = value
                    .split(',')
                    .map(|s| parse_f64(key, s.trim()))
                    .collect::<Result<Vec<_>, _>>()?;
            }
            "time_points" => self.time_points = parse_usize(key, value)?,
            "x_points" => self.x_points = parse_usize(key, value)?,
            "paths" => self.paths = parse_usize(key, value)?,
            "steps" => self.steps = parse_usize(key, value)?,
            "seed" => {
                self.seed = value.parse::<u64>().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                    ty: "u64",
                })?
            }
            "workers" => self.workers = parse_usize(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "write_paths" => self.write_paths = parse_usize(key, value)?,
            _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
        }
        Ok(())
    }

    /// Validated parameters at a given risk ratio.
    pub fn params_at_rho(&self, rho: f64) -> Result<Params, ConfigError> {
        if !(0.0..1.0).contains(&rho) {
            return Err(ConfigError::Invalid(format!("rho must lie in [0, 1), got {rho}")));
        }
        let mut m = self.model.clone();
        let kappa = 2.0 * m.m * m.m * (m.eta + m.lambda1);
        m.lambda2 = if rho == 0.0 {
            0.0
        } else if kappa > 0.0 {
            rho / kappa
        } else {
            return Err(ConfigError::Invalid(format!(
                "rho = {rho} > 0 requires m > 0 (kappa = 0 admits only rho = 0)"
            )));
        };
        Ok(m.validate()?)
    }

    /// Validated parameters for single-run commands: absolute lambda2 if set,
    /// otherwise the configured rho.
    pub fn params(&self) -> Result<Params, ConfigError> {
        if let Some(l2) = self.lambda2_abs {
            let mut m = self.model.clone();
            m.lambda2 = l2;
            return Ok(m.validate()?);
        }
        self.params_at_rho(self.rho)
    }

    /// All sweep parameter sets, in rho_list order.
    pub fn sweep(&self) -> Result<Vec<(f64, Params)>, ConfigError> {
        self.rho_list.iter().map(|&r| Ok((r, self.params_at_rho(r)?))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config_with_comments() {
        let text = "\
# model
gamma = 2.5e-7
eta = 25e-6   # temporary impact
m = 2e6
rho_list = 0, 0.1, 0.5
paths = 1000
seed = 42
out_dir = /tmp/x
";
        let cfg = ExperimentConfig::from_str(text).unwrap();
        assert_eq!(cfg.model.gamma, 2.5e-7);
        assert_eq!(cfg.rho_list, vec![0.0, 0.1, 0.5]);
        assert_eq!(cfg.paths, 1000);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/x"));
        assert!(cfg.params().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_str("gama = 1e-7\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { key, .. } if key == "gama"));
    }

    #[test]
    fn bad_values_and_syntax_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_str("gamma = hello\n").unwrap_err(),
            ConfigError::BadValue { .. }
        ));
        assert!(matches!(
            ExperimentConfig::from_str("gamma\n").unwrap_err(),
            ConfigError::Syntax { .. }
        ));
    }

    #[test]
    fn inadmissible_parameters_surface_as_config_errors() {
        let cfg = ExperimentConfig::from_str("beta = 0\n").unwrap();
        assert!(matches!(cfg.params(), Err(ConfigError::Params(_))));
    }

    #[test]
    fn rho_without_fill_uncertainty_is_rejected() {
        let cfg = ExperimentConfig::from_str("m = 0\nrho = 0.5\n").unwrap();
        assert!(cfg.params().is_err());
        let cfg0 = ExperimentConfig::from_str("m = 0\nrho = 0\n").unwrap();
        assert!(cfg0.params().is_ok());
    }

    #[test]
    fn lambda2_escape_hatch_overrides_rho() {
        let cfg = ExperimentConfig::from_str("lambda2 = 1e-10\nrho = 0.9\n").unwrap();
        let p = cfg.params().unwrap();
        assert_eq!(p.lambda2(), 1e-10);
    }
}
