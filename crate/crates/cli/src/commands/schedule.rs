//! `schedule`: the scheduled liquidation program normalized so every curve
//! starts at 1 (its value at t = 0) and ends at 0, with time also reported in
//! characteristic-rate units omega * t.

use super::CliError;
use crate::config::{ConfigError, ExperimentConfig};
use crate::manifest::{fmt17, RunManifest};
use execrisk::closed_form::eval_coefficients;
use std::time::Instant;

pub const HEADER: &str = "rho,t,omega_t,ell_normalized";

pub fn render(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let mut out = String::from(HEADER);
    out.push('\n');
    for (rho, p) in cfg.sweep()? {
        let norm = eval_coefficients(&p, 0.0)?.ell;
        if !(norm > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "schedule normalization undefined at rho = {rho}: ell(T) = {norm} (needs lambda1, v_bar > 0 and, for rho > 0, gamma and m > 0)"
            ))
            .into());
        }
        let omega = p.omega();
        let n = cfg.time_points.max(2);
        for i in 0..n {
            let t = p.horizon() * i as f64 / (n - 1) as f64;
            let k = eval_coefficients(&p, t)?;
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt17(rho),
                fmt17(t),
                fmt17(omega * t),
                fmt17(k.ell / norm),
            ));
        }
    }
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let csv = render(cfg)?;
    let mut manifest = RunManifest::new("schedule", cfg.seed, cfg.workers, cfg.echo.clone());
    manifest.write_output(&cfg.out_dir, "schedule.csv", &csv)?;
    manifest.record_timing("schedule", started.elapsed().as_millis());
    manifest.finalize(&cfg.out_dir)?;
    println!(
        "schedule: wrote {} rows to {}",
        csv.lines().count() - 1,
        cfg.out_dir.join("schedule.csv").display()
    );
    Ok(())
}
