//! `simulate`: closed-loop path ensemble under the optimal policy, with a
//! long-format CSV of the first few paths and a summary comparing the Monte
//! Carlo objective against the closed-form value function.

use super::CliError;
use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use execrisk::dynamics::{self, MarkovControl, SimPath};
use execrisk::risk;
use execrisk::{closed_form, Params};
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub rho: f64,
    pub x_terminal_mean: f64,
    pub x_terminal_se: f64,
    pub pnl_terminal_mean: f64,
    pub pnl_terminal_se: f64,
    pub terminal_mismatch_rms: f64,
    pub pnl_identity_max_gap_mean: f64,
    pub value_function: f64,
    pub objective_estimate: f64,
    pub objective_std_error: f64,
    pub objective_half_width_99: f64,
    pub objective_z_score: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

pub struct SimulateOutput {
    pub paths_csv: String,
    pub summary: SimulateSummary,
}

pub fn compute(cfg: &ExperimentConfig, p: &Params) -> Result<SimulateOutput, CliError> {
    let n_paths = cfg.paths.max(2);
    let n_steps = cfg.steps.max(2);

    // ensemble statistics without materializing every path
    let stats: Result<Vec<(f64, f64, f64, f64)>, _> = (0..n_paths as u64)
        .into_par_iter()
        .map(|pi| {
            dynamics::simulate_closed_loop(p, n_steps, cfg.seed, pi).map(|path| {
                (
                    *path.x.last().unwrap(),
                    *path.pi0_direct.last().unwrap(),
                    path.terminal_mismatch.unwrap(),
                    dynamics::pnl_identity_check(&path),
                )
            })
        })
        .collect();
    let stats = stats.map_err(CliError::from)?;

    let xs: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let pnl: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let eps2: f64 = stats.iter().map(|s| s.2 * s.2).sum::<f64>() / n_paths as f64;
    let gap_mean: f64 = stats.iter().map(|s| s.3).sum::<f64>() / n_paths as f64;
    let (x_mean, x_se) = mean_se(&xs);
    let (pnl_mean, pnl_se) = mean_se(&pnl);

    let w = closed_form::value_function(p, 0.0, p.x0())?;
    let est = risk::objective_estimate(p, &MarkovControl::Optimal, 0.0, p.x0(), n_paths, n_steps, cfg.seed)?;

    // long-format CSV of the first write_paths paths
    let mut csv = String::from(SimPath::CSV_HEADER);
    csv.push('\n');
    for pi in 0..cfg.write_paths.min(n_paths) {
        let path = dynamics::simulate_closed_loop(p, n_steps, cfg.seed, pi as u64)?;
        path.write_csv_rows(pi, &mut csv);
    }

    Ok(SimulateOutput {
        paths_csv: csv,
        summary: SimulateSummary {
            paths: n_paths,
            steps: n_steps,
            seed: cfg.seed,
            rho: p.rho(),
            x_terminal_mean: x_mean,
            x_terminal_se: x_se,
            pnl_terminal_mean: pnl_mean,
            pnl_terminal_se: pnl_se,
            terminal_mismatch_rms: eps2.sqrt(),
            pnl_identity_max_gap_mean: gap_mean,
            value_function: w,
            objective_estimate: est.estimate,
            objective_std_error: est.std_error,
            objective_half_width_99: est.half_width,
            objective_z_score: (est.estimate - w) / est.std_error.max(f64::MIN_POSITIVE),
        },
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let p = cfg.params()?;
    let out = compute(cfg, &p)?;
    let mut manifest = RunManifest::new("simulate", cfg.seed, cfg.workers, cfg.echo.clone());
    manifest.write_output(&cfg.out_dir, "paths.csv", &out.paths_csv)?;
    let summary_json = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    manifest.write_output(&cfg.out_dir, "summary.json", &summary_json)?;
    manifest.record_timing("simulate", started.elapsed().as_millis());
    manifest.finalize(&cfg.out_dir)?;
    println!(
        "simulate: {} paths x {} steps; J = {:.6e} vs w = {:.6e} (z = {:+.2}); outputs in {}",
        out.summary.paths,
        out.summary.steps,
        out.summary.objective_estimate,
        out.summary.value_function,
        out.summary.objective_z_score,
        cfg.out_dir.display()
    );
    Ok(())
}
