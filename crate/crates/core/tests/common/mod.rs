#![allow(dead_code)]

use betaqual::diagnostics::effective_sample_size;

/// Two-sided one-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of the KS statistic at level 0.01.
pub fn ks_critical_001(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// CDF of Beta(1/2, 1/2).
pub fn arcsine_cdf(z: f64) -> f64 {
    std::f64::consts::FRAC_2_PI * z.clamp(0.0, 1.0).sqrt().asin()
}

/// Mean and its Monte Carlo standard error from the effective sample size.
pub fn mean_and_mcse(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / effective_sample_size(x)).sqrt())
}
