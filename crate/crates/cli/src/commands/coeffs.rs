//! `coeffs`: emit the Riccati coefficients and liquidation schedule on a time
//! grid, one row per (rho, t). The data behind a mean-reversion-rate plot.

use super::CliError;
use crate::config::ExperimentConfig;
use crate::manifest::{fmt17, RunManifest};
use execrisk::closed_form::eval_coefficients;
use std::time::Instant;

pub const HEADER: &str = "rho,t,a,b,c,a_minus_gamma,ell,neg_a";

pub fn render(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let mut out = String::from(HEADER);
    out.push('\n');
    for (rho, p) in cfg.sweep()? {
        let n = cfg.time_points.max(2);
        for i in 0..n {
            let t = p.horizon() * i as f64 / (n - 1) as f64;
            let k = eval_coefficients(&p, t)?;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                fmt17(rho),
                fmt17(t),
                fmt17(k.a),
                fmt17(k.b),
                fmt17(k.c),
                fmt17(k.a_minus_gamma),
                fmt17(k.ell),
                fmt17(-k.a),
            ));
        }
    }
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let csv = render(cfg)?;
    let mut manifest = RunManifest::new("coeffs", cfg.seed, cfg.workers, cfg.echo.clone());
    manifest.write_output(&cfg.out_dir, "coeffs.csv", &csv)?;
    manifest.record_timing("coeffs", started.elapsed().as_millis());
    manifest.finalize(&cfg.out_dir)?;
    println!("coeffs: wrote {} rows to {}", csv.lines().count() - 1, cfg.out_dir.join("coeffs.csv").display());
    Ok(())
}
