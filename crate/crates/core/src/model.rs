//! The beta-regression probability model.
//!
//! Each response `y` is beta distributed with mean
//! `mu = w_1 x_1 + ... + w_k x_k + w_{k+1} z` (identity link, weights on the
//! simplex, `z` a per-observation latent score) and a variance `sigma2` shared
//! by every observation of a group. Priors: flat Dirichlet on the weights,
//! Beta(1/2, 1/2) on each latent, and `sigma2 ~ Unif(0, m)` where
//! `m = min_i mu_i (1 - mu_i)` keeps every beta shape strictly positive.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Absolute tolerance on the simplex sum.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Upper bound of `mu (1 - mu)`, used as the truncation bound when a group has
/// no observations.
pub const MAX_BERNOULLI_VARIANCE: f64 = 0.25;

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Period label of an observation. The model supports the two survey periods.
pub type Period = u8;

/// Survey observations: attribute scores `x` (row-major `n x k`), responses `y`
/// and a period label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    k: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    period: Vec<Period>,
}

impl Dataset {
    /// Builds a dataset from row vectors, validating every entry.
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, period: Vec<Period>) -> Result<Self> {
        let k = match x.first() {
            Some(row) => row.len(),
            None => return Err(Error::invalid("dataset has no rows; use Dataset::empty")),
        };
        if let Some((i, row)) = x.iter().enumerate().find(|(_, r)| r.len() != k) {
            return Err(Error::invalid(format!(
                "row {i} has {} attributes, expected {k}",
                row.len()
            )));
        }
        Self::from_flat(k, x.into_iter().flatten().collect(), y, period)
    }

    /// Builds a dataset from a row-major attribute matrix.
    pub fn from_flat(k: usize, x: Vec<f64>, y: Vec<f64>, period: Vec<Period>) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("attribute count k must be at least 1"));
        }
        let n = y.len();
        if x.len() != n * k {
            return Err(Error::invalid(format!(
                "attribute matrix has {} entries, expected {n} x {k}",
                x.len()
            )));
        }
        if period.len() != n {
            return Err(Error::invalid(format!(
                "{} period labels for {n} responses",
                period.len()
            )));
        }
        if let Some(pos) = x.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "attribute score {} at row {}, column {} is outside [0, 1]",
                x[pos],
                pos / k,
                pos % k
            )));
        }
        if let Some(i) = y.iter().position(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::invalid(format!(
                "response {} at row {i} is not strictly inside (0, 1)",
                y[i]
            )));
        }
        if let Some(i) = period.iter().position(|p| !matches!(p, 1 | 2)) {
            return Err(Error::invalid(format!(
                "period label {} at row {i} is not 1 or 2",
                period[i]
            )));
        }
        Ok(Dataset { k, x, y, period })
    }

    /// A dataset with no observations. The likelihood is empty, so a fit on it
    /// samples the prior.
    pub fn empty(k: usize) -> Result<Self> {
        Self::from_flat(k, Vec::new(), Vec::new(), Vec::new())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.k)
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn periods(&self) -> &[Period] {
        &self.period
    }

    /// Distinct period labels present, ascending.
    pub fn periods_present(&self) -> Vec<Period> {
        let mut p: Vec<Period> = self.period.clone();
        p.sort_unstable();
        p.dedup();
        p
    }

    /// Checks that every present period has at least two rows and that the
    /// dataset is not empty.
    pub fn check_groups(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyDataset("no observations".into()));
        }
        for p in self.periods_present() {
            let count = self.period.iter().filter(|&&q| q == p).count();
            if count < 2 {
                return Err(Error::invalid(format!(
                    "period {p} has {count} row(s); at least 2 are required"
                )));
            }
        }
        Ok(())
    }

    /// The rows belonging to one period.
    pub fn group(&self, period: Period) -> Result<Dataset> {
        let idx: Vec<usize> = (0..self.n()).filter(|&i| self.period[i] == period).collect();
        if idx.is_empty() {
            return Err(Error::invalid(format!("period {period} has no observations")));
        }
        Ok(self.select(&idx))
    }

    /// The rows at the given indices, in that order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(idx.len() * self.k);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Dataset {
            k: self.k,
            x,
            y: idx.iter().map(|&i| self.y[i]).collect(),
            period: idx.iter().map(|&i| self.period[i]).collect(),
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.k != other.k {
            return Err(Error::invalid(format!(
                "cannot concatenate datasets with k = {} and k = {}",
                self.k, other.k
            )));
        }
        let mut out = self.clone();
        out.x.extend_from_slice(&other.x);
        out.y.extend_from_slice(&other.y);
        out.period.extend_from_slice(&other.period);
        Ok(out)
    }
}

/// A point on the simplex: `k` attribute weights followed by the latent weight.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates entries in `[0, 1]` and a sum within [`SIMPLEX_TOL`] of one,
    /// then renormalizes.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::invalid(format!(
                "weight vector needs at least 2 entries, got {}",
                w.len()
            )));
        }
        if let Some(v) = w.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("weight {v} is outside [0, 1]")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector(w.into_iter().map(|v| v / sum).collect()))
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len >= 2, "weight vector needs at least 2 entries");
        WeightVector(vec![1.0 / len as f64; len])
    }

    /// Wraps a vector already known to lie on the simplex.
    pub(crate) fn from_raw(w: Vec<f64>) -> Self {
        debug_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        WeightVector(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of observed attributes, `len() - 1`.
    pub fn k(&self) -> usize {
        self.0.len() - 1
    }

    pub fn latent(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Per-observation latent scores, each strictly inside (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if let Some(v) = z.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::support(format!("latent {v} is not inside (0, 1)")));
        }
        Ok(LatentVector(z))
    }

    pub(crate) fn from_raw(z: Vec<f64>) -> Self {
        LatentVector(z)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One group's full parameter state.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub weights: WeightVector,
    pub latents: LatentVector,
    pub sigma2: f64,
}

impl ModelParams {
    pub fn new(weights: WeightVector, latents: LatentVector, sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::invalid(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(ModelParams {
            weights,
            latents,
            sigma2,
        })
    }

    fn check_dims(&self, data: &Dataset) -> Result<()> {
        if self.weights.k() != data.k() {
            return Err(Error::invalid(format!(
                "{} weights for k = {} attributes",
                self.weights.len(),
                data.k()
            )));
        }
        if self.latents.len() != data.n() {
            return Err(Error::invalid(format!(
                "{} latents for {} observations",
                self.latents.len(),
                data.n()
            )));
        }
        Ok(())
    }

    /// Implied mean of every observation.
    pub fn means(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.check_dims(data)?;
        let w = self.weights.as_slice();
        Ok(data
            .rows()
            .zip(self.latents.as_slice())
            .map(|(x, &z)| linear_mean(w, x, z))
            .collect())
    }
}

/// Beta shape parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaShape {
    pub a: f64,
    pub b: f64,
}

impl BetaShape {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid(format!(
                "beta shape ({a}, {b}) must be finite and positive"
            )));
        }
        Ok(BetaShape { a, b })
    }
}

#[inline]
pub(crate) fn linear_mean(w: &[f64], x: &[f64], z: f64) -> f64 {
    let k = x.len();
    let mut mu = w[k] * z;
    for (wi, xi) in w[..k].iter().zip(x) {
        mu += wi * xi;
    }
    mu
}

/// Mean response under the identity link: the convex combination of the
/// attribute scores and the latent score.
pub fn mean_response(weights: &WeightVector, x_row: &[f64], z: f64) -> Result<f64> {
    if x_row.len() != weights.k() {
        return Err(Error::invalid(format!(
            "{} attribute scores for {} weights",
            x_row.len(),
            weights.len()
        )));
    }
    if x_row.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("attribute scores must lie in [0, 1]"));
    }
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::invalid(format!("latent {z} is not inside (0, 1)")));
    }
    Ok(linear_mean(weights.as_slice(), x_row, z).clamp(0.0, 1.0))
}

/// Common factor `(mu (1 - mu) - sigma2) / sigma2` of both shapes, or `None`
/// when it is not strictly positive.
#[inline]
fn shape_scale(mu: f64, sigma2: f64) -> Option<f64> {
    let r = (mu * (1.0 - mu) - sigma2) / sigma2;
    (r > 0.0 && r.is_finite()).then_some(r)
}

/// Mean/variance to beta shape:
/// `a = ((1 - mu) mu^2 - mu sigma2) / sigma2`,
/// `b = (1 - mu)(mu - mu^2 - sigma2) / sigma2`.
///
/// Both are evaluated as `mu r` and `(1 - mu) r` with the shared factor
/// `r = (mu (1 - mu) - sigma2) / sigma2`, which avoids cancellation near the
/// bound.
pub fn moments_to_shape(mu: f64, sigma2: f64) -> Result<BetaShape> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::invalid(format!("mean {mu} is not inside (0, 1)")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid(format!("variance {sigma2} must be positive")));
    }
    match shape_scale(mu, sigma2) {
        Some(r) => Ok(BetaShape {
            a: mu * r,
            b: (1.0 - mu) * r,
        }),
        None => Err(Error::support(format!(
            "variance {sigma2} is not below mu(1 - mu) = {}",
            mu * (1.0 - mu)
        ))),
    }
}

/// Beta mean and variance of a shape.
pub fn shape_to_moments(shape: BetaShape) -> Result<(f64, f64)> {
    let BetaShape { a, b } = BetaShape::new(shape.a, shape.b)?;
    let s = a + b;
    Ok((a / s, a * b / (s * s * (s + 1.0))))
}

#[inline]
pub(crate) fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Beta log-density for `y` inside (0, 1).
#[inline]
pub fn beta_ln_pdf(y: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * y.ln() + (b - 1.0) * (-y).ln_1p() - ln_beta_fn(a, b)
}

/// Log-density of one response, `-inf` outside the support.
#[inline]
pub(crate) fn obs_ln_lik(y: f64, mu: f64, sigma2: f64) -> f64 {
    if !(mu > 0.0 && mu < 1.0) {
        return f64::NEG_INFINITY;
    }
    match shape_scale(mu, sigma2) {
        Some(r) => beta_ln_pdf(y, mu * r, (1.0 - mu) * r),
        None => f64::NEG_INFINITY,
    }
}

/// Beta(1/2, 1/2) log-density.
#[inline]
pub(crate) fn ln_arcsine_pdf(z: f64) -> f64 {
    if !(z > 0.0 && z < 1.0) {
        return f64::NEG_INFINITY;
    }
    -LN_PI - 0.5 * z.ln() - 0.5 * (-z).ln_1p()
}

/// Flat Dirichlet log-density on a simplex with `len` components: `ln (len-1)!`.
pub(crate) fn ln_flat_dirichlet(len: usize) -> f64 {
    ln_gamma(len as f64)
}

/// `min_i mu_i (1 - mu_i)` over the given means, [`MAX_BERNOULLI_VARIANCE`]
/// when there are none.
pub(crate) fn truncation_bound(means: &[f64]) -> f64 {
    means
        .iter()
        .map(|m| m * (1.0 - m))
        .fold(MAX_BERNOULLI_VARIANCE, f64::min)
}

/// Whether the uniform prior on `sigma2` carries its `-ln m` normalization.
///
/// With the term the prior is a proper density for every `(w, z)`, which
/// makes the joint prior marginal on the weights exactly Dirichlet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TruncationNorm {
    #[default]
    Include,
    Omit,
}

/// Sum of beta log-densities of the responses.
pub fn log_likelihood(params: &ModelParams, data: &Dataset) -> Result<f64> {
    let means = params.means(data)?;
    let mut total = 0.0;
    for (i, (&y, &mu)) in data.y().iter().zip(&means).enumerate() {
        let l = obs_ln_lik(y, mu, params.sigma2);
        if l == f64::NEG_INFINITY {
            return Err(Error::support(format!(
                "observation {i}: sigma2 = {} with mean {mu}",
                params.sigma2
            )));
        }
        total += l;
    }
    Ok(total)
}

/// Joint log prior with the default [`TruncationNorm::Include`].
pub fn log_prior(params: &ModelParams, data: &Dataset) -> Result<f64> {
    log_prior_with(params, data, TruncationNorm::Include)
}

pub fn log_prior_with(params: &ModelParams, data: &Dataset, norm: TruncationNorm) -> Result<f64> {
    let means = params.means(data)?;
    let w = params.weights.as_slice();
    if w.iter().any(|v| !(0.0..=1.0).contains(v))
        || (w.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL
    {
        return Err(Error::support("weights are off the simplex"));
    }
    let mut lp = ln_flat_dirichlet(w.len());
    for &z in params.latents.as_slice() {
        let l = ln_arcsine_pdf(z);
        if l == f64::NEG_INFINITY {
            return Err(Error::support(format!("latent {z} is not inside (0, 1)")));
        }
        lp += l;
    }
    let m = truncation_bound(&means);
    if !(params.sigma2 > 0.0 && params.sigma2 < m) {
        return Err(Error::support(format!(
            "sigma2 = {} is not inside (0, {m})",
            params.sigma2
        )));
    }
    if norm == TruncationNorm::Include {
        lp -= m.ln();
    }
    Ok(lp)
}

/// Unnormalized log posterior; `-inf` anywhere outside the support.
pub fn log_posterior(params: &ModelParams, data: &Dataset) -> f64 {
    log_posterior_with(params, data, TruncationNorm::Include)
}

pub fn log_posterior_with(params: &ModelParams, data: &Dataset, norm: TruncationNorm) -> f64 {
    match (
        log_prior_with(params, data, norm),
        log_likelihood(params, data),
    ) {
        (Ok(p), Ok(l)) if (p + l).is_finite() => p + l,
        _ => f64::NEG_INFINITY,
    }
}

/// True iff the weights are on the simplex, every latent is inside (0, 1),
/// and `0 < sigma2 < min_i mu_i (1 - mu_i)` strictly.
pub fn check_support(params: &ModelParams, data: &Dataset) -> bool {
    log_prior_with(params, data, TruncationNorm::Omit).is_ok()
}
