//! Small numeric helpers shared across modules.

/// Two-sided 99% normal quantile, z such that P(|Z| <= z) = 0.99.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// Max-shifted log-mean-exp of `u`: returns (log(mean(exp(u))), shift, spread).
///
/// The shift is max(u); spread is max(u) - min(u), reported so callers can
/// detect exponent ranges where the tail is undersampled.
pub fn log_mean_exp(u: &[f64]) -> (f64, f64, f64) {
    assert!(!u.is_empty());
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for &x in u {
        hi = hi.max(x);
        lo = lo.min(x);
    }
    let mut acc = 0.0;
    for &x in u {
        acc += (x - hi).exp();
    }
    (hi + (acc / u.len() as f64).ln(), hi, hi - lo)
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of y against x.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.len() {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    num / den
}

/// Relative gap |a-b| / max(|a|, |b|, floor).
pub fn rel_gap(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
