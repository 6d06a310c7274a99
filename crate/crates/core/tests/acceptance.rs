//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (visible under `cargo test -- --nocapture`).
//!
//! Every tolerance is pinned in code here; nothing is deferred to runtime
//! configuration.

use execrisk::closed_form::{self, eval_coefficients};
use execrisk::dynamics::{self, MarkovControl};
use execrisk::hjb::{self, ClosedFormSurface, Grid, PerturbedSurface};
use execrisk::math::{rel_gap as rel, slope};
use execrisk::risk;
use execrisk::{ModelParams, Params};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

fn model(gamma: f64, eta: f64, m: f64, beta_mult: f64, lambda1: f64, horizon: f64, rho: f64) -> Params {
    let mut p = ModelParams {
        gamma,
        eta,
        sigma: 0.5,
        m,
        beta: beta_mult * eta,
        lambda1,
        lambda2: 0.0,
        v_bar: 1.0,
        horizon,
        x0: 1e6,
        s0: 10.0,
    };
    let kappa = 2.0 * p.m * p.m * (p.eta + p.lambda1);
    if kappa > 0.0 {
        p.lambda2 = rho / kappa;
    }
    p.validate().unwrap()
}

/// Desk-scale set behind the figures, at a given risk ratio.
fn desk(rho: f64) -> Params {
    model(2.5e-7, 25e-6, 2e6, 100.0, 1e-4, 5.0, rho)
}

/// Monte Carlo battery: five admissible sets whose Euler weak error at
/// N = 2^12 is far below the Monte Carlo half-width at 1e5 paths (verified
/// over 8 seeds during calibration; the suite pins one).
fn keystone_battery() -> Vec<(&'static str, Params)> {
    vec![
        ("desk-scale, T=2, rho=0.1", model(2.5e-7, 25e-6, 2e6, 100.0, 1e-4, 2.0, 0.1)),
        ("coarse-fill, T=3, rho=0.25", model(5e-7, 50e-6, 1e6, 30.0, 2e-4, 3.0, 0.25)),
        ("low-penalty, T=5, rho=0.3", model(2.5e-7, 25e-6, 1e6, 20.0, 1e-4, 5.0, 0.3)),
        ("mid-penalty, T=2, rho=0.2", model(2.5e-7, 25e-6, 2e6, 40.0, 1e-4, 2.0, 0.2)),
        ("thin-impact, T=2, rho=0.15", model(1e-7, 10e-6, 3e6, 50.0, 5e-5, 2.0, 0.15)),
    ]
}

const KEYSTONE_SEED: u64 = 2;

#[test]
fn criterion_01_riccati_closed_form_vs_ode_oracle() {
    let steps = 100_000;
    let tol = 1e-8;
    let mut sets: Vec<(String, Params)> = [0.0, 0.1, 0.5, 0.9]
        .iter()
        .map(|&r| (format!("desk rho={r}"), desk(r)))
        .collect();
    sets.push(("coarse-fill".into(), model(5e-7, 50e-6, 1e6, 30.0, 2e-4, 3.0, 0.25)));
    sets.push(("thin-impact".into(), model(1e-7, 10e-6, 3e6, 50.0, 5e-5, 2.0, 0.15)));
    let mut worst = 0.0f64;
    let mut worst_set = String::new();
    for (name, p) in &sets {
        let sol = hjb::integrate_riccati(p, steps).unwrap();
        let amax = sol.a.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let bmax = sol.b.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let cmax = sol.c.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let mut sup = 0.0f64;
        for (i, &t) in sol.times.iter().enumerate() {
            let k = eval_coefficients(p, t).unwrap();
            sup = sup
                .max(rel(sol.a[i], k.a, 1e-9 * amax))
                .max(rel(sol.b[i], k.b, 1e-9 * bmax.max(1e-300)))
                .max(rel(sol.c[i], k.c, 1e-9 * cmax.max(1e-300)));
        }
        if sup > worst {
            worst = sup;
            worst_set = name.clone();
        }
        assert!(sup < tol, "criterion 1 FAIL on {name}: sup rel gap {sup:.3e} >= {tol:.0e}");
    }
    println!(
        "criterion  1 riccati closed form vs ODE oracle: PASS (sup rel gap {worst:.3e} < {tol:.0e}, worst on {worst_set}, {} sets, {steps} steps)",
        sets.len()
    );
}

#[test]
fn criterion_02_hjb_residual() {
    let p = desk(0.5);
    let grid = Grid { t_min: 0.0, t_max: p.horizon(), x_min: -2.0 * p.x0(), x_max: 2.0 * p.x0(), nt: 200, nx: 200 };
    let tol = 1e-8;
    let base = hjb::hjb_residual(&p, &ClosedFormSurface::new(&p), &grid).unwrap();
    assert!(
        base.max_rel_residual < tol,
        "criterion 2 FAIL: closed-form max rel residual {:.3e} >= {tol:.0e}",
        base.max_rel_residual
    );
    let perturbed = PerturbedSurface { inner: ClosedFormSurface::new(&p), amplitude: 1e-3 };
    let pert = hjb::hjb_residual(&p, &perturbed, &grid).unwrap();
    let ratio = pert.max_rel_residual / base.max_rel_residual.max(1e-16);
    assert!(ratio >= 10.0, "criterion 2 FAIL: perturbed/base residual ratio {ratio:.1} < 10");
    println!(
        "criterion  2 HJB residual: PASS (closed form {:.3e} < {tol:.0e} on 200x200, perturbed fails by {ratio:.1e}x)",
        base.max_rel_residual
    );
}

fn refined_increments(p: &Params, seed: u64, path: u64, fine: usize, coarse: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = dynamics::path_rng(seed, path);
    let dtf = p.horizon() / fine as f64;
    let sqf = dtf.sqrt();
    let k = fine / coarse;
    let mut db1 = vec![0.0; coarse];
    let mut db2 = vec![0.0; coarse];
    for j in 0..fine {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        db1[j / k] += z1 * sqf;
        db2[j / k] += z2 * sqf;
    }
    (db1, db2)
}

#[test]
fn criterion_03_fbsde_terminal_consistency() {
    let p = desk(0.5);
    let levels = [1024usize, 2048, 4096, 8192];
    let n_paths = 1000u64;
    let fine = *levels.last().unwrap();
    let rms: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let sum: f64 = (0..n_paths)
                .into_par_iter()
                .map(|pi| {
                    let (db1, db2) = refined_increments(&p, 2024, pi, fine, n);
                    let e = dynamics::simulate_closed_loop_with_increments(&p, &db1, &db2)
                        .unwrap()
                        .terminal_mismatch
                        .unwrap();
                    e * e
                })
                .sum();
            (sum / n_paths as f64).sqrt()
        })
        .collect();
    assert!(rms.windows(2).all(|w| w[1] < w[0]), "criterion 3 FAIL: RMS not decreasing: {rms:?}");
    let xs: Vec<f64> = levels.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = rms.iter().map(|e| e.log2()).collect();
    let order = -slope(&xs, &ys);
    assert!(order >= 0.5, "criterion 3 FAIL: empirical order {order:.3} < 0.5 (rms {rms:?})");
    println!(
        "criterion  3 FBSDE terminal consistency: PASS (RMS eps_T {:.3e} -> {:.3e} over N=2^10..2^13, order {order:.2} >= 0.5)",
        rms[0],
        rms[3]
    );
}

#[test]
fn criterion_04_keystone_value_identity() {
    let n_paths = 100_000;
    let n_steps = 1 << 12;
    let mut details = Vec::new();
    for (name, p) in keystone_battery() {
        let w = closed_form::value_function(&p, 0.0, p.x0()).unwrap();
        let est =
            risk::objective_estimate(&p, &MarkovControl::Optimal, 0.0, p.x0(), n_paths, n_steps, KEYSTONE_SEED)
                .unwrap();
        let dev = (est.estimate - w).abs();
        assert!(
            dev <= est.half_width,
            "criterion 4 FAIL on {name}: |J - w| = {dev:.3e} > 99% half-width {:.3e} (z = {:+.2})",
            est.half_width,
            (est.estimate - w) / est.std_error
        );
        details.push(format!("{name} z={:+.2}", (est.estimate - w) / est.std_error));
    }
    println!(
        "criterion  4 keystone value identity: PASS (5 sets, 1e5 paths, N=2^12, all |J-w| within 99% half-width: {})",
        details.join("; ")
    );
}

#[test]
fn criterion_05_optimality_of_the_closed_form_policy() {
    let p = model(2.5e-7, 25e-6, 2e6, 40.0, 1e-4, 2.0, 0.2);
    let w = closed_form::value_function(&p, 0.0, p.x0()).unwrap();
    let family = vec![
        MarkovControl::ScaledOptimal { factor: 0.8 },
        MarkovControl::ScaledOptimal { factor: 0.9 },
        MarkovControl::ScaledOptimal { factor: 0.95 },
        MarkovControl::Optimal,
        MarkovControl::ScaledOptimal { factor: 1.05 },
        MarkovControl::ScaledOptimal { factor: 1.1 },
        MarkovControl::ScaledOptimal { factor: 1.2 },
        MarkovControl::OffsetOptimal { offset: 0.1 * p.v_bar() },
    ];
    let rows = risk::suboptimality_scan(&p, &family, 0.0, p.x0(), 40_000, 1 << 12, KEYSTONE_SEED).unwrap();
    for row in &rows {
        assert!(
            row.estimate.estimate <= w + 3.0 * row.estimate.half_width,
            "criterion 5 FAIL: {} has J = {:.6e} above w + 3hw = {:.6e}",
            row.tag,
            row.estimate.estimate,
            w + 3.0 * row.estimate.half_width
        );
    }
    // common random numbers: gaps ordered by |eps| on each side of 1.0
    let gap_of = |tag: &str| rows.iter().find(|r| r.tag == tag).unwrap().gap;
    let down = [gap_of("scaled_0.95"), gap_of("scaled_0.9"), gap_of("scaled_0.8")];
    let up = [gap_of("scaled_1.05"), gap_of("scaled_1.1"), gap_of("scaled_1.2")];
    assert!(down.windows(2).all(|w| w[1] > w[0]), "criterion 5 FAIL: shrink-side gaps not monotone: {down:?}");
    assert!(up.windows(2).all(|w| w[1] > w[0]), "criterion 5 FAIL: grow-side gaps not monotone: {up:?}");
    // strict dominance of the optimal row is decisive (common random numbers)
    // at |eps| >= 0.1; the 5% rows and the tiny rate offset (0.1 v_bar is
    // ~1e-6 of the desk-scale rate) sit within residual noise of the optimum
    let opt_gap = gap_of("optimal");
    for tag in ["scaled_0.8", "scaled_0.9", "scaled_1.1", "scaled_1.2"] {
        assert!(gap_of(tag) > opt_gap, "criterion 5 FAIL: {tag} beat the optimal control");
    }
    for tag in ["scaled_0.95", "scaled_1.05", "offset_0.1"] {
        let hw = rows.iter().find(|r| r.tag == tag).unwrap().estimate.half_width;
        assert!(gap_of(tag) > opt_gap - hw, "criterion 5 FAIL: {tag} beat the optimal control beyond noise");
    }
    println!(
        "criterion  5 optimality of the closed-form policy: PASS (8 controls, J <= w + 3hw, gaps grow with |eps|; optimal gap {:.2e}, worst perturbed gap {:.2e})",
        opt_gap,
        up[2]
    );
}

#[test]
fn criterion_06_entropic_risk_oracle() {
    let (mu, s, lambda) = (1.5, 2.0, 0.7);
    let mut rng = ChaCha12Rng::seed_from_u64(612);
    let samples: Vec<f64> = (0..1_000_000).map(|_| mu + s * rng.sample::<f64, _>(StandardNormal)).collect();
    let est = risk::entropic_risk(&samples, lambda).unwrap();
    let expected = -mu + lambda * s * s / 2.0;
    let z = (est.estimate - expected) / est.std_error;
    assert!(z.abs() < 3.0, "criterion 6 FAIL: Gaussian estimate off by {z:.2} standard errors");

    let constant = vec![4.0; 64];
    let c_est = risk::entropic_risk(&constant, lambda).unwrap();
    assert!((c_est.estimate + 4.0).abs() < 1e-13, "criterion 6 FAIL: constant case {}", c_est.estimate);

    let shifted: Vec<f64> = samples.iter().take(10_000).map(|x| x + 2.5).collect();
    let base: Vec<f64> = samples.iter().take(10_000).copied().collect();
    let d = risk::entropic_risk(&shifted, lambda).unwrap().estimate
        - (risk::entropic_risk(&base, lambda).unwrap().estimate - 2.5);
    assert!(d.abs() < 1e-12, "criterion 6 FAIL: translation deviation {d:.3e}");
    println!(
        "criterion  6 entropic risk oracle: PASS (Gaussian z = {z:+.2} at 1e6 samples; constant exact; translation dev {d:.1e})"
    );
}

#[test]
fn criterion_07_axiom_suite() {
    let (pairs, trees) = risk::default_battery();
    let mut worst_eq: f64 = 0.0;
    for lambda in [0.25, 1.0, 3.0, 10.0] {
        let report = risk::axiom_suite(lambda, &pairs, &trees).unwrap();
        assert!(report.convexity_margin >= 0.0, "criterion 7 FAIL: convexity margin {}", report.convexity_margin);
        assert!(report.monotonicity_margin > 0.0, "criterion 7 FAIL: monotonicity");
        worst_eq = worst_eq.max(report.translation_max_dev).max(report.semigroup_max_dev);
    }
    assert!(worst_eq <= 32.0 * f64::EPSILON, "criterion 7 FAIL: equality axiom deviation {worst_eq:.3e}");
    println!(
        "criterion  7 axiom suite (exact trees, zero statistical tolerance): PASS (worst equality deviation {worst_eq:.2e} <= 32 ulp)"
    );
}

#[test]
fn criterion_08_pnl_identity() {
    // deterministic m = sigma = 0 collapse under the constant unwind: the two
    // accumulators coincide to rounding, consistent with the O(dt^2) bound
    let mut dm = desk(0.0).model().clone();
    dm.m = 0.0;
    dm.sigma = 1e-300;
    let pd = dm.validate().unwrap();
    let rate = pd.x0() / pd.horizon();
    let scale = pd.gamma() / 2.0 * pd.x0() * pd.x0() + pd.eta() * rate * rate * pd.horizon();
    let mut det_gaps = Vec::new();
    for n in [1000usize, 2000] {
        let path = dynamics::simulate_forward(&pd, &MarkovControl::Constant { rate }, n, 1, 0).unwrap();
        let gap = dynamics::pnl_identity_check(&path);
        let dt = pd.horizon() / n as f64;
        let bound = (1e-9 * scale).max(1e-3 * scale * dt * dt);
        assert!(gap <= bound, "criterion 8 FAIL: deterministic gap {gap:.3e} above O(dt^2) bound {bound:.3e}");
        det_gaps.push(gap / scale);
    }

    // stochastic order >= 0.5 on the terminal pathwise gap, common noise
    let p = desk(0.5);
    let levels = [1024usize, 2048, 4096, 8192];
    let n_paths = 800u64;
    let fine = *levels.last().unwrap();
    let rms: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let sum: f64 = (0..n_paths)
                .into_par_iter()
                .map(|pi| {
                    let (db1, db2) = refined_increments(&p, 809, pi, fine, n);
                    let path =
                        dynamics::simulate_forward_with_increments(&p, &MarkovControl::Optimal, &db1, &db2).unwrap();
                    let d = path.pi0_direct.last().unwrap() - path.pi0_closed.last().unwrap();
                    d * d
                })
                .sum();
            (sum / n_paths as f64).sqrt()
        })
        .collect();
    let xs: Vec<f64> = levels.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = rms.iter().map(|e| e.log2()).collect();
    let order = -slope(&xs, &ys);
    assert!(order >= 0.5, "criterion 8 FAIL: stochastic order {order:.3} < 0.5 (rms {rms:?})");
    println!(
        "criterion  8 P&L identity: PASS (deterministic rel gaps {:.1e}/{:.1e} ~ rounding; stochastic order {order:.2} >= 0.5)",
        det_gaps[0], det_gaps[1]
    );
}

#[test]
fn criterion_09_figure_shape_reproduction() {
    // mean-reversion rate -a: nondecreasing in t and in rho on the desk grid
    let rhos = [0.1, 0.5, 0.9];
    let n = 501;
    let mut prev: Option<Vec<f64>> = None;
    for &rho in &rhos {
        let p = desk(rho);
        let neg_a: Vec<f64> = (0..n)
            .map(|i| -eval_coefficients(&p, p.horizon() * i as f64 / (n - 1) as f64).unwrap().a)
            .collect();
        assert!(
            neg_a.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-13)),
            "criterion 9 FAIL: -a not nondecreasing in t at rho={rho}"
        );
        if let Some(prev) = &prev {
            assert!(
                neg_a.iter().zip(prev).all(|(cur, pr)| cur >= pr),
                "criterion 9 FAIL: -a not nondecreasing in rho"
            );
        }
        prev = Some(neg_a);
    }

    // normalized schedule: starts at 1, ends at 0, mid-horizon value
    // nondecreasing in rho (concavity rises with risk aversion), linear as rho -> 0
    let base = desk(0.1);
    let horizon = 2.0 / base.omega(); // omega(0.1) * T = 2
    let mid_value = |rho: f64| {
        let mut m = desk(rho).model().clone();
        m.horizon = horizon;
        let p = m.validate().unwrap();
        let ell_t = eval_coefficients(&p, 0.0).unwrap().ell;
        let ell_mid = eval_coefficients(&p, horizon / 2.0).unwrap().ell;
        let ell_end = eval_coefficients(&p, horizon).unwrap().ell;
        assert!(ell_end == 0.0, "criterion 9 FAIL: schedule must end at 0");
        (ell_mid / ell_t, ell_t)
    };
    let mids: Vec<f64> = rhos.iter().map(|&r| mid_value(r).0).collect();
    assert!(
        mids.windows(2).all(|w| w[1] >= w[0]),
        "criterion 9 FAIL: mid-horizon normalized schedule not nondecreasing in rho: {mids:?}"
    );
    // rho -> 0 limit: normalized schedule tends to the linear ramp
    let mut m = desk(1e-8).model().clone();
    m.horizon = horizon;
    let p_lin = m.validate().unwrap();
    let ell_t = eval_coefficients(&p_lin, 0.0).unwrap().ell;
    let mut max_dev = 0.0f64;
    for i in 0..=100 {
        let t = horizon * i as f64 / 100.0;
        let frac = eval_coefficients(&p_lin, t).unwrap().ell / ell_t;
        max_dev = max_dev.max((frac - (horizon - t) / horizon).abs());
    }
    assert!(max_dev < 1e-3, "criterion 9 FAIL: rho->0 schedule deviates from linear by {max_dev:.3e}");
    println!(
        "criterion  9 figure shape reproduction: PASS (-a monotone in t and rho on 501-point grid; normalized mid-schedule {mids:?} nondecreasing; rho->0 linear dev {max_dev:.1e})"
    );
}

#[test]
fn criterion_10_asymptotic_limits() {
    let tol = 1e-3;
    let mut worst_late = 0.0f64;
    let mut worst_early = 0.0f64;
    for rho in [0.1, 0.5, 0.9] {
        let p = desk(rho);
        // late stage at omega (T - t) = 1e-3
        let tau = 1e-3 / p.omega();
        let t = p.horizon() - tau;
        let exact = eval_coefficients(&p, t).unwrap();
        let asy = closed_form::asymptotics(&p, t).unwrap();
        worst_late = worst_late.max(rel(asy.ell0, exact.ell, 1e-300)).max(rel(asy.a0, exact.a, 1e-300));
        // early stage at omega tau = 20
        let mut m = p.model().clone();
        m.horizon = 20.0 / p.omega();
        let pl = m.validate().unwrap();
        let exact = eval_coefficients(&pl, 0.0).unwrap();
        let asy = closed_form::asymptotics(&pl, 0.0).unwrap();
        worst_early = worst_early.max(rel(asy.ell_inf, exact.ell, 1e-300)).max(rel(asy.a_inf, exact.a, 1e-300));
    }
    assert!(worst_late < tol, "criterion 10 FAIL: late-stage gap {worst_late:.3e} >= {tol}");
    assert!(worst_early < tol, "criterion 10 FAIL: early-stage gap {worst_early:.3e} >= {tol}");

    // ensemble started at the early-stage fixed point stays there; the
    // committee rate is scaled so x_bar_inf (= 2 lambda1 v_bar / gamma) sits
    // well above the ensemble-mean noise floor and actually pins the location
    let mut m = desk(0.5).model().clone();
    m.v_bar = 5000.0;
    m.horizon = 10.0 / desk(0.5).omega();
    let asy = closed_form::asymptotics(&m.clone().validate().unwrap(), 0.0).unwrap();
    m.x0 = asy.x_bar_inf;
    let p = m.validate().unwrap();
    let n_paths = 4000u64;
    let n_steps = 512;
    let idx = n_steps / 8;
    let xs: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|pi| dynamics::simulate_closed_loop(&p, n_steps, 1010, pi).unwrap().x[idx])
        .collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let z = (mean - asy.x_bar_inf) / se;
    assert!(z.abs() < 3.0, "criterion 10 FAIL: ensemble mean {mean:.4e} vs x_bar_inf {:.4e} is {z:+.2} SE", asy.x_bar_inf);
    println!(
        "criterion 10 asymptotic limits: PASS (late gap {worst_late:.1e}, early gap {worst_early:.1e} < 1e-3; OU ensemble z = {z:+.2})"
    );
}
