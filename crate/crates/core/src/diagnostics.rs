//! Posterior post-processing: summaries, DIC, tail-area probabilities of
//! between-period weight differences, an R²-type fit measure and per-parameter
//! convergence checks.

use crate::error::{Error, Result};
use crate::model::{self, check_support, Dataset, LatentVector, ModelParams, WeightVector};
use crate::sampler::Chain;

/// Posterior summary of one scalar quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub mean: f64,
    pub sd: f64,
    pub p2_5: f64,
    pub median: f64,
    pub p97_5: f64,
}

/// Empirical quantile of sorted data by linear interpolation between order
/// statistics at position `(n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if a == b {
        a
    } else {
        a + (h - lo as f64) * (b - a)
    }
}

fn sorted_copy(draws: &[f64]) -> Vec<f64> {
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Welford mean and sample variance (denominator `n - 1`, zero for one value).
fn mean_var(draws: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in draws.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    let var = if draws.len() > 1 {
        m2 / (draws.len() - 1) as f64
    } else {
        0.0
    };
    (mean, var)
}

/// Mean, SD and the 2.5%, 50% and 97.5% quantiles of a sample.
pub fn summarize(draws: &[f64], label: &str) -> Result<SummaryRow> {
    if draws.is_empty() {
        return Err(Error::invalid(format!("no draws to summarize for {label}")));
    }
    let (mean, var) = mean_var(draws);
    let sorted = sorted_copy(draws);
    Ok(SummaryRow {
        label: label.to_string(),
        mean,
        sd: var.max(0.0).sqrt(),
        p2_5: quantile_sorted(&sorted, 0.025),
        median: quantile_sorted(&sorted, 0.5),
        p97_5: quantile_sorted(&sorted, 0.975),
    })
}

/// Minimum, quartiles and maximum, as drawn in a box plot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn five_number(draws: &[f64]) -> Result<FiveNumber> {
    if draws.is_empty() {
        return Err(Error::invalid("no draws for a five-number summary"));
    }
    let s = sorted_copy(draws);
    Ok(FiveNumber {
        min: s[0],
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q3: quantile_sorted(&s, 0.75),
        max: s[s.len() - 1],
    })
}

/// `min(P(d > 0), P(d < 0))` estimated from draws; exact zeros count in
/// neither tail.
pub fn tail_area_pi0(draws: &[f64]) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::invalid("tail-area probability needs at least one draw"));
    }
    let pos = draws.iter().filter(|&&d| d > 0.0).count();
    let neg = draws.iter().filter(|&&d| d < 0.0).count();
    Ok(pos.min(neg) as f64 / draws.len() as f64)
}

/// Draw-wise weight differences, first chain minus second, paired by index.
pub fn weight_differences(first: &Chain, second: &Chain) -> Result<Vec<Vec<f64>>> {
    if first.len() != second.len() {
        return Err(Error::invalid(format!(
            "chains have {} and {} draws",
            first.len(),
            second.len()
        )));
    }
    if first.weight_count() != second.weight_count() {
        return Err(Error::invalid(format!(
            "chains have {} and {} weights",
            first.weight_count(),
            second.weight_count()
        )));
    }
    Ok(first
        .draws
        .iter()
        .zip(&second.draws)
        .map(|(a, b)| {
            a.weights
                .as_slice()
                .iter()
                .zip(b.weights.as_slice())
                .map(|(x, y)| x - y)
                .collect()
        })
        .collect())
}

/// The parameter point at which the deviance in DIC was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlugIn {
    /// Component-wise posterior mean.
    PosteriorMean,
    /// The stored draw closest to the posterior mean, used when the mean
    /// falls outside the support.
    NearestDraw(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DicResult {
    pub dbar: f64,
    pub d_at_mean: f64,
    pub p_d: f64,
    pub dic: f64,
    /// One entry per fitted model contributing to this result.
    pub plug_in: Vec<PlugIn>,
}

impl DicResult {
    fn new(dbar: f64, d_at_mean: f64, plug_in: Vec<PlugIn>) -> Self {
        DicResult {
            dbar,
            d_at_mean,
            p_d: dbar - d_at_mean,
            dic: 2.0 * dbar - d_at_mean,
            plug_in,
        }
    }

    /// DIC of independent models fitted to disjoint data: deviances add.
    pub fn combine(&self, other: &DicResult) -> DicResult {
        let mut plug_in = self.plug_in.clone();
        plug_in.extend_from_slice(&other.plug_in);
        DicResult::new(
            self.dbar + other.dbar,
            self.d_at_mean + other.d_at_mean,
            plug_in,
        )
    }
}

/// Mean computed as an offset from the first value, so that identical values
/// average to themselves exactly.
fn anchored_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(first) = it.next() else { return 0.0 };
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v - first;
        count += 1;
    }
    first + sum / count as f64
}

fn deviance(params: &ModelParams, data: &Dataset) -> Result<f64> {
    Ok(-2.0 * model::log_likelihood(params, data)?)
}

/// Component-wise posterior mean of `(w, z, sigma2)`, weights renormalized
/// to the simplex.
pub fn posterior_mean_params(chain: &Chain) -> Result<ModelParams> {
    let first = chain
        .draws
        .first()
        .ok_or_else(|| Error::invalid("chain has no draws"))?;
    let kw = first.weights.len();
    let n = first.latents.len();
    let mut w: Vec<f64> = (0..kw)
        .map(|l| anchored_mean(chain.draws.iter().map(move |d| d.weights.as_slice()[l])))
        .collect();
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 4.0 * f64::EPSILON * kw as f64 {
        for v in &mut w {
            *v /= s;
        }
    }
    let z: Vec<f64> = (0..n)
        .map(|i| anchored_mean(chain.draws.iter().map(move |d| d.latents.as_slice()[i])))
        .collect();
    let sigma2 = anchored_mean(chain.draws.iter().map(|d| d.sigma2));
    Ok(ModelParams {
        weights: WeightVector::from_raw(w),
        latents: LatentVector::from_raw(z),
        sigma2,
    })
}

fn mean_deviance(chain: &Chain, data: &Dataset) -> Result<f64> {
    let devs = chain
        .draws
        .iter()
        .map(|d| deviance(d, data))
        .collect::<Result<Vec<_>>>()?;
    Ok(anchored_mean(devs.iter().copied()))
}

/// Deviance information criterion with the posterior mean as plug-in point.
///
/// `data` may be the full dataset; the chain's model kind selects its rows.
pub fn dic(chain: &Chain, data: &Dataset) -> Result<DicResult> {
    let group = chain.model_kind.select(data)?;
    let dbar = mean_deviance(chain, &group)?;
    let mean = posterior_mean_params(chain)?;
    if !check_support(&mean, &group) {
        return Err(Error::UndefinedAtMean(
            "posterior mean parameters are outside the support".into(),
        ));
    }
    let d_at_mean = deviance(&mean, &group)?;
    Ok(DicResult::new(dbar, d_at_mean, vec![PlugIn::PosteriorMean]))
}

/// [`dic`], falling back to the draw nearest the posterior mean when the mean
/// itself is outside the support.
pub fn dic_or_nearest(chain: &Chain, data: &Dataset) -> Result<DicResult> {
    match dic(chain, data) {
        Err(Error::UndefinedAtMean(_)) => {}
        other => return other,
    }
    let group = chain.model_kind.select(data)?;
    let mean = posterior_mean_params(chain)?;
    let dist = |d: &ModelParams| -> f64 {
        let dw: f64 = d
            .weights
            .as_slice()
            .iter()
            .zip(mean.weights.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let dz: f64 = d
            .latents
            .as_slice()
            .iter()
            .zip(mean.latents.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        dw + dz + (d.sigma2 - mean.sigma2).powi(2)
    };
    let (idx, nearest) = chain
        .draws
        .iter()
        .enumerate()
        .min_by(|a, b| dist(a.1).total_cmp(&dist(b.1)))
        .expect("chain is non-empty after dic()");
    let dbar = mean_deviance(chain, &group)?;
    let d_at = deviance(nearest, &group)?;
    Ok(DicResult::new(dbar, d_at, vec![PlugIn::NearestDraw(idx)]))
}

/// Per-draw `1 - sum (y - mu)^2 / sum (y - ybar)^2`.
pub fn r_squared_draws(chain: &Chain, data: &Dataset) -> Result<Vec<f64>> {
    if chain.is_empty() {
        return Err(Error::invalid("chain has no draws"));
    }
    let group = chain.model_kind.select(data)?;
    if group.n() < 2 {
        return Err(Error::invalid("R² needs at least two observations"));
    }
    let y = group.y();
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let total: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    if total == 0.0 {
        return Err(Error::invalid("responses have zero total variation"));
    }
    chain
        .draws
        .iter()
        .map(|d| {
            let mu = d.means(&group)?;
            let resid: f64 = y.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(1.0 - resid / total)
        })
        .collect()
}

pub fn r_squared(chain: &Chain, data: &Dataset) -> Result<SummaryRow> {
    summarize(&r_squared_draws(chain, data)?, "R2")
}

/// Label of weight `l` (zero-based): `w1`, ..., `w{k+1}`.
pub fn weight_label(l: usize) -> String {
    format!("w{}", l + 1)
}

/// Summaries of every weight followed by `sigma2`.
pub fn parameter_summaries(chain: &Chain) -> Result<Vec<SummaryRow>> {
    let mut rows = (0..chain.weight_count())
        .map(|l| summarize(&chain.weight_trace(l), &weight_label(l)))
        .collect::<Result<Vec<_>>>()?;
    rows.push(summarize(&chain.sigma2_trace(), "sigma2")?);
    Ok(rows)
}

fn autocovariance(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum::<f64>()
        / n as f64
}

/// Integrated autocorrelation time by Geyer's initial positive sequence:
/// pair sums `rho_{2s} + rho_{2s+1}` are accumulated while positive.
/// Returns `(tau, gamma_0)`; `None` for a constant series.
fn integrated_autocorrelation(x: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if x.iter().all(|&v| v == x[0]) {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let g0 = autocovariance(x, mean, 0);
    if g0 <= 0.0 {
        return None;
    }
    let mut pair_sum = 0.0;
    let mut s = 0;
    while 2 * s + 1 < n {
        let p = (autocovariance(x, mean, 2 * s) + autocovariance(x, mean, 2 * s + 1)) / g0;
        if p <= 0.0 {
            break;
        }
        pair_sum += p;
        s += 1;
    }
    Some(((-1.0 + 2.0 * pair_sum).max(1.0 / n as f64), g0))
}

/// Effective sample size of one chain; a constant chain reports `n`.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    match integrated_autocorrelation(x) {
        Some((tau, _)) => x.len() as f64 / tau,
        None => x.len() as f64,
    }
}

/// Spectral variance at frequency zero divided by the segment length.
fn mean_variance(x: &[f64]) -> f64 {
    match integrated_autocorrelation(x) {
        Some((tau, g0)) => g0 * tau / x.len() as f64,
        None => 0.0,
    }
}

/// Geweke z-score comparing the first 10% with the last 50% of a chain.
/// A constant chain reports 0.
pub fn geweke_z(x: &[f64]) -> f64 {
    let n = x.len();
    let a = &x[..(n / 10).max(1)];
    let b = &x[n - (n / 2).max(1)..];
    let ma = anchored_mean(a.iter().copied());
    let mb = anchored_mean(b.iter().copied());
    let var = mean_variance(a) + mean_variance(b);
    if ma == mb {
        0.0
    } else if var == 0.0 {
        (ma - mb).signum() * f64::INFINITY
    } else {
        (ma - mb) / var.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub label: String,
    pub ess: f64,
    pub geweke_z: f64,
}

/// Minimum chain length accepted by [`convergence_report`].
pub const MIN_DIAGNOSTIC_DRAWS: usize = 100;

/// ESS and Geweke z for every weight and `sigma2`.
pub fn convergence_report(chain: &Chain) -> Result<Vec<ConvergenceRow>> {
    if chain.len() < MIN_DIAGNOSTIC_DRAWS {
        return Err(Error::invalid(format!(
            "convergence diagnostics need at least {MIN_DIAGNOSTIC_DRAWS} draws, chain has {}",
            chain.len()
        )));
    }
    let mut traces: Vec<(String, Vec<f64>)> = (0..chain.weight_count())
        .map(|l| (weight_label(l), chain.weight_trace(l)))
        .collect();
    traces.push(("sigma2".into(), chain.sigma2_trace()));
    Ok(traces
        .into_iter()
        .map(|(label, x)| ConvergenceRow {
            label,
            ess: effective_sample_size(&x),
            geweke_z: geweke_z(&x),
        })
        .collect())
}
