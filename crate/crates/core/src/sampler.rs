//! Metropolis-within-Gibbs sampler for the beta-regression posterior.
//!
//! One sweep makes
//!
//! 1. an independence proposal of the weights from their flat prior;
//! 2. a joint move of the weights, `sigma2` and every latent, where the
//!    weights and `sigma2` take a random-walk step and the latents are
//!    redrawn from grid approximations of their conditionals;
//! 3. on odd iterations after the first estimate of the posterior spread, the
//!    same joint move with an independence proposal for the weights and
//!    `sigma2`;
//! 4. a scalar random walk on the logit of every latent score.
//!
//! Each move carries the log-Jacobian of its chart, so the chain targets the
//! posterior on the original scale. Step sizes and the joint proposal adapt
//! only during burn-in. [`update_weights`] and [`update_sigma2`] are simpler
//! single-block kernels kept for building custom samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{
    self, check_support, ln_arcsine_pdf, obs_ln_lik, truncation_bound, Dataset, LatentVector,
    ModelParams, Period, TruncationNorm, WeightVector, MAX_BERNOULLI_VARIANCE,
};

/// Random number generator used by every chain.
pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Target acceptance rate of the scalar latent updates.
    pub target_acceptance: f64,
    /// Target acceptance rate of the joint block random walk.
    pub target_acceptance_weights: f64,
    pub adapt_during_burnin: bool,
    /// When false the likelihood is switched off and the chain samples the prior.
    pub likelihood: bool,
    pub truncation_norm: TruncationNorm,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 3000,
            burnin: 1000,
            thin: 1,
            seed: 1,
            target_acceptance: 0.44,
            target_acceptance_weights: 0.234,
            adapt_during_burnin: true,
            likelihood: true,
            truncation_norm: TruncationNorm::Include,
        }
    }
}

impl SamplerConfig {
    pub fn with_protocol(iterations: usize, burnin: usize, seed: u64) -> Self {
        SamplerConfig {
            iterations,
            burnin,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be positive"));
        }
        if self.burnin >= self.iterations {
            return Err(Error::invalid(format!(
                "burnin {} must be below iterations {}",
                self.burnin, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        for t in [self.target_acceptance, self.target_acceptance_weights] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::invalid(format!("target acceptance {t} is not in (0, 1)")));
            }
        }
        Ok(())
    }

    /// Number of stored draws, `floor((iterations - burnin) / thin)`.
    pub fn draw_count(&self) -> usize {
        (self.iterations - self.burnin) / self.thin
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// One period fitted on its own.
    Separated(Period),
    /// All rows pooled under one set of parameters.
    Joint,
}

impl ModelKind {
    /// Rows of `data` this model is fitted to.
    pub fn select(&self, data: &Dataset) -> Result<Dataset> {
        match self {
            ModelKind::Joint => Ok(data.clone()),
            ModelKind::Separated(p) => data.group(*p),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelKind::Joint => "joint".to_string(),
            ModelKind::Separated(p) => format!("period{p}"),
        }
    }
}

/// The density a sweep targets: a group's data plus the prior options.
#[derive(Clone, Copy, Debug)]
pub struct Target<'a> {
    pub data: &'a Dataset,
    pub likelihood: bool,
    pub norm: TruncationNorm,
}

impl<'a> Target<'a> {
    pub fn posterior(data: &'a Dataset) -> Self {
        Target {
            data,
            likelihood: true,
            norm: TruncationNorm::Include,
        }
    }

    pub fn prior(data: &'a Dataset) -> Self {
        Target {
            data,
            likelihood: false,
            norm: TruncationNorm::Include,
        }
    }

    pub fn log_density(&self, params: &ModelParams) -> f64 {
        if self.likelihood {
            model::log_posterior_with(params, self.data, self.norm)
        } else {
            model::log_prior_with(params, self.data, self.norm).unwrap_or(f64::NEG_INFINITY)
        }
    }

    /// Log density of the `sigma2` prior factor given the truncation bound.
    fn ln_variance_prior(&self, sigma2: f64, bound: f64) -> f64 {
        if !(sigma2 > 0.0 && sigma2 < bound) {
            return f64::NEG_INFINITY;
        }
        match self.norm {
            TruncationNorm::Include => -bound.ln(),
            TruncationNorm::Omit => 0.0,
        }
    }
}

/// Additive log-ratio coordinates `ln(w_l / w_{k+1})`, `l = 1..k`.
pub fn alr_transform(weights: &WeightVector) -> Result<Vec<f64>> {
    let w = weights.as_slice();
    if let Some(pos) = w.iter().position(|&v| v <= 0.0) {
        return Err(Error::Boundary(format!(
            "weight {pos} is zero; log-ratio coordinates are undefined"
        )));
    }
    let last = weights.latent().ln();
    Ok(w[..w.len() - 1].iter().map(|v| v.ln() - last).collect())
}

/// Inverse of [`alr_transform`]: a softmax with the last logit pinned at zero.
pub fn alr_inverse(coords: &[f64]) -> WeightVector {
    let max = coords.iter().copied().fold(0.0, f64::max);
    let mut w: Vec<f64> = coords
        .iter()
        .map(|u| (u - max).exp())
        .chain(std::iter::once((-max).exp()))
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    WeightVector::from_raw(w)
}

fn sum_ln(w: &[f64]) -> f64 {
    w.iter().map(|v| v.ln()).sum()
}

#[inline]
fn metropolis_accept(log_ratio: f64, rng: &mut ChainRng) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

fn check_state(state: &ModelParams, target: &Target) -> Result<()> {
    if state.weights.k() != target.data.k() || state.latents.len() != target.data.n() {
        return Err(Error::invalid("state dimensions do not match the data"));
    }
    Ok(())
}

/// Block update of the weights by a Gaussian random walk of scale `step` in
/// log-ratio coordinates.
pub fn update_weights(
    state: &ModelParams,
    target: &Target,
    rng: &mut ChainRng,
    step: f64,
) -> Result<(ModelParams, bool)> {
    check_state(state, target)?;
    let coords = alr_transform(&state.weights)?;
    let proposal_coords: Vec<f64> = coords
        .iter()
        .map(|u| u + step * rng.sample::<f64, _>(StandardNormal))
        .collect();
    if step == 0.0 {
        return Ok((state.clone(), true));
    }
    let proposed_w = alr_inverse(&proposal_coords);
    if proposed_w.as_slice().iter().any(|&v| v <= 0.0) {
        return Ok((state.clone(), false));
    }
    let proposal = ModelParams {
        weights: proposed_w,
        latents: state.latents.clone(),
        sigma2: state.sigma2,
    };
    // |d w / d u| = prod_l w_l over all k+1 components
    let log_ratio = target.log_density(&proposal) + sum_ln(proposal.weights.as_slice())
        - target.log_density(state)
        - sum_ln(state.weights.as_slice());
    if metropolis_accept(log_ratio, rng) {
        Ok((proposal, true))
    } else {
        Ok((state.clone(), false))
    }
}

/// Independence Metropolis update of the weights with the flat Dirichlet
/// prior as proposal. The prior cancels from the acceptance ratio, leaving
/// the likelihood and the `sigma2` prior factor. Random-walk steps in
/// log-ratio coordinates mix slowly when the posterior of the weights is
/// wide, which is where these proposals are accepted most often.
pub fn update_weights_from_prior(
    state: &ModelParams,
    target: &Target,
    rng: &mut ChainRng,
) -> Result<(ModelParams, bool)> {
    check_state(state, target)?;
    let len = state.weights.len();
    let mut w: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    if w.iter().any(|&v| v <= 0.0) {
        return Ok((state.clone(), false));
    }
    let proposal = ModelParams {
        weights: WeightVector::from_raw(w),
        latents: state.latents.clone(),
        sigma2: state.sigma2,
    };
    let log_ratio = target.log_density(&proposal) - target.log_density(state);
    if metropolis_accept(log_ratio, rng) {
        Ok((proposal, true))
    } else {
        Ok((state.clone(), false))
    }
}

/// Cells per latent in the grid proposal of [`update_collapsed`].
pub const LATENT_GRID_CELLS: usize = 8;

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

/// `ln((e^x - 1) / x)`.
fn ln_exprel(x: f64) -> f64 {
    if x.abs() < 1e-10 {
        0.5 * x
    } else if x > 30.0 {
        x - x.ln()
    } else {
        (x.exp_m1() / x).ln()
    }
}

/// Proposal for one latent given the weights and `sigma2`, in the angle
/// `theta` with `z = sin^2 theta`, where the Beta(1/2, 1/2) prior is flat.
/// On each cell of a uniform grid the log-density is linear between the
/// values of the conditional at the nodes.
struct LatentGrid {
    node: [f64; LATENT_GRID_CELLS + 1],
    ln_mass: [f64; LATENT_GRID_CELLS],
    ln_norm: f64,
}

impl LatentGrid {
    const WIDTH: f64 = HALF_PI / LATENT_GRID_CELLS as f64;

    fn new(y: f64, base: f64, latent_weight: f64, sigma2: f64, likelihood: bool) -> Self {
        let mut node = [f64::NEG_INFINITY; LATENT_GRID_CELLS + 1];
        for (j, v) in node.iter_mut().enumerate() {
            let z = (j as f64 * Self::WIDTH).sin().powi(2);
            let mu = base + latent_weight * z;
            if mu > 0.0 && mu < 1.0 && sigma2 < mu * (1.0 - mu) {
                *v = if likelihood { obs_ln_lik(y, mu, sigma2) } else { 0.0 };
            }
        }
        let mut ln_mass = [f64::NEG_INFINITY; LATENT_GRID_CELLS];
        for (j, m) in ln_mass.iter_mut().enumerate() {
            if node[j].is_finite() && node[j + 1].is_finite() {
                *m = Self::WIDTH.ln() + node[j] + ln_exprel(node[j + 1] - node[j]);
            }
        }
        let top = ln_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ln_norm = if top.is_finite() {
            top + ln_mass.iter().map(|m| (m - top).exp()).sum::<f64>().ln()
        } else {
            f64::NEG_INFINITY
        };
        LatentGrid { node, ln_mass, ln_norm }
    }

    fn ln_density(&self, theta: f64) -> f64 {
        let j = ((theta / Self::WIDTH) as usize).min(LATENT_GRID_CELLS - 1);
        if !self.ln_mass[j].is_finite() {
            return f64::NEG_INFINITY;
        }
        let t = (theta - j as f64 * Self::WIDTH) / Self::WIDTH;
        self.node[j] + t * (self.node[j + 1] - self.node[j]) - self.ln_norm
    }

    /// Inverse-CDF draw from two uniforms: one picks the cell, one the
    /// position within it.
    fn sample(&self, mut u: f64, v: f64) -> f64 {
        let mut cell = LATENT_GRID_CELLS - 1;
        for (j, m) in self.ln_mass.iter().enumerate() {
            let p = (m - self.ln_norm).exp();
            if u < p {
                cell = j;
                break;
            }
            u -= p;
        }
        // inverse CDF of a density proportional to exp(x t) on [0, 1]
        let x = self.node[cell + 1] - self.node[cell];
        let t = if x.abs() < 1e-10 {
            v
        } else if x > 0.0 {
            1.0 + (v + (1.0 - v) * (-x).exp()).ln() / x
        } else {
            (v * x.exp_m1()).ln_1p() / x
        };
        (cell as f64 + t.clamp(0.0, 1.0)) * Self::WIDTH
    }
}

/// Lower-triangular factor `L` of the random-walk covariance used by
/// [`update_collapsed`], over the log-ratio weight coordinates followed by
/// `ln sigma2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalShape {
    dim: usize,
    lower: Vec<f64>,
}

impl ProposalShape {
    pub fn identity(dim: usize) -> Self {
        let mut lower = vec![0.0; dim * dim];
        for i in 0..dim {
            lower[i * dim + i] = 1.0;
        }
        ProposalShape { dim, lower }
    }

    /// Sample mean of `points` and the Cholesky factor of their covariance,
    /// or `None` when there are too few points or the covariance is not
    /// positive definite.
    pub fn fit(points: &[Vec<f64>]) -> Option<(Vec<f64>, Self)> {
        let dim = points.first()?.len();
        let n = points.len();
        if n <= 2 * dim {
            return None;
        }
        let mut mean = vec![0.0; dim];
        for p in points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v / n as f64;
            }
        }
        let mut cov = vec![0.0; dim * dim];
        for p in points {
            for i in 0..dim {
                for j in 0..=i {
                    cov[i * dim + j] += (p[i] - mean[i]) * (p[j] - mean[j]) / (n - 1) as f64;
                }
            }
        }
        let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
        for i in 0..dim {
            cov[i * dim + i] += 1e-8 * trace / dim as f64 + 1e-12;
        }
        let mut lower = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let dot: f64 = (0..j).map(|m| lower[i * dim + m] * lower[j * dim + m]).sum();
                let v = cov[i * dim + j] - dot;
                if i == j {
                    if !(v > 0.0) {
                        return None;
                    }
                    lower[i * dim + i] = v.sqrt();
                } else {
                    lower[i * dim + j] = v / lower[j * dim + j];
                }
            }
        }
        Some((mean, ProposalShape { dim, lower }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ProposalShape {
            dim: self.dim,
            lower: self.lower.iter().map(|v| v * factor).collect(),
        }
    }

    /// `L^-1 r` by forward substitution.
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            let dot: f64 = (0..i).map(|j| self.lower[i * d + j] * out[j]).sum();
            out[i] = (r[i] - dot) / self.lower[i * d + i];
        }
        out
    }

    fn apply(&self, noise: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..=i).map(|j| self.lower[i * self.dim + j] * noise[j]).sum())
            .collect()
    }
}

/// How [`update_collapsed`] proposes the weights and `sigma2`, in
/// log-ratio weight coordinates followed by `ln sigma2`.
#[derive(Clone, Debug, PartialEq)]
pub enum JointProposal {
    /// `x + step L e` with `e` standard normal.
    RandomWalk { step: f64, shape: ProposalShape },
    /// `mean + L e`, independent of the current state.
    Independence { mean: Vec<f64>, shape: ProposalShape },
}

impl JointProposal {
    fn dim(&self) -> usize {
        match self {
            JointProposal::RandomWalk { shape, .. } | JointProposal::Independence { shape, .. } => {
                shape.dim()
            }
        }
    }
}

/// Joint update of the weights, `sigma2` and every latent.
///
/// The weights and `sigma2` are proposed by `proposal`. Each latent is then redrawn from a grid
/// approximation of its conditional given the proposed values, ignoring the
/// coupling through the truncation bound; the Metropolis-Hastings ratio
/// corrects for the approximation. With many observations the latents and
/// the latent weight trade off against `sigma2`, and one-at-a-time updates
/// cross that ridge slowly; this move crosses it in one step.
pub fn update_collapsed(
    state: &ModelParams,
    target: &Target,
    rng: &mut ChainRng,
    proposal: &JointProposal,
) -> Result<(ModelParams, bool)> {
    collapsed_move(state, target, rng, proposal, &mut None)
}

/// Latent grids of the state they were built for.
struct GridCache {
    weights: Vec<f64>,
    sigma2: f64,
    grids: Vec<LatentGrid>,
}

fn latent_grids(target: &Target, weights: &[f64], sigma2: f64) -> Vec<LatentGrid> {
    let k = target.data.k();
    target
        .data
        .rows()
        .zip(target.data.y())
        .map(|(x, &y)| {
            let base = model::linear_mean(weights, x, 0.0);
            LatentGrid::new(y, base, weights[k], sigma2, target.likelihood)
        })
        .collect()
}

/// [`update_collapsed`] reusing the grids of the current state when `cache`
/// holds them, and leaving the grids of the resulting state in `cache`.
fn collapsed_move(
    state: &ModelParams,
    target: &Target,
    rng: &mut ChainRng,
    proposal: &JointProposal,
    cache: &mut Option<GridCache>,
) -> Result<(ModelParams, bool)> {
    check_state(state, target)?;
    let k = target.data.k();
    if proposal.dim() != k + 1 {
        return Err(Error::invalid(format!(
            "joint proposal has dimension {}, expected {}",
            proposal.dim(),
            k + 1
        )));
    }
    let noise: Vec<f64> = (0..=k).map(|_| rng.sample(StandardNormal)).collect();
    let current_coords = chart_coords(state)?;
    let (coords, ln_q_ratio) = match proposal {
        JointProposal::RandomWalk { step, shape } => {
            let delta = shape.apply(&noise);
            let x: Vec<f64> = current_coords.iter().zip(&delta).map(|(c, d)| c + step * d).collect();
            (x, 0.0)
        }
        JointProposal::Independence { mean, shape } => {
            let delta = shape.apply(&noise);
            let x: Vec<f64> = mean.iter().zip(&delta).map(|(m, d)| m + d).collect();
            let back: Vec<f64> = current_coords.iter().zip(mean).map(|(c, m)| c - m).collect();
            let r = shape.solve(&back);
            // ln q(current) - ln q(proposed)
            let ln_q = -0.5 * r.iter().map(|v| v * v).sum::<f64>()
                + 0.5 * noise.iter().map(|v| v * v).sum::<f64>();
            (x, ln_q)
        }
    };
    let sigma2 = coords[k].exp();
    let weights = alr_inverse(&coords[..k]);
    // a draw for the latents is consumed either way, so that the stream does
    // not depend on which branch below is taken
    let uniforms: Vec<[f64; 2]> = (0..target.data.n()).map(|_| [rng.random(), rng.random()]).collect();

    let current = match cache.take() {
        Some(c) if c.sigma2 == state.sigma2 && c.weights == state.weights.as_slice() => c,
        _ => GridCache {
            weights: state.weights.as_slice().to_vec(),
            sigma2: state.sigma2,
            grids: latent_grids(target, state.weights.as_slice(), state.sigma2),
        },
    };
    let reject = |cache: &mut Option<GridCache>, current: GridCache| {
        *cache = Some(current);
        Ok((state.clone(), false))
    };
    if weights.as_slice().iter().any(|&v| v <= 0.0) || !(sigma2 > 0.0) {
        return reject(cache, current);
    }
    let forward = latent_grids(target, weights.as_slice(), sigma2);
    if forward.iter().any(|g| !g.ln_norm.is_finite()) {
        return reject(cache, current);
    }
    let mut latents = Vec::with_capacity(forward.len());
    let mut ln_forward = 0.0;
    for (g, u) in forward.iter().zip(&uniforms) {
        let theta = g.sample(u[0], u[1]);
        let z = theta.sin().powi(2);
        if !(z > 0.0 && z < 1.0) {
            return reject(cache, current);
        }
        ln_forward += g.ln_density(theta);
        latents.push(z);
    }
    let ln_reverse: f64 = current
        .grids
        .iter()
        .zip(state.latents.as_slice())
        .map(|(g, &z)| g.ln_density(z.sqrt().asin()))
        .sum();

    let candidate = ModelParams {
        weights,
        latents: LatentVector::from_raw(latents),
        sigma2,
    };
    // charts: log-ratio weights, log sigma2, and theta with dz/dtheta = 2 sqrt(z (1 - z))
    let ln_chart = |p: &ModelParams| -> f64 {
        sum_ln(p.weights.as_slice())
            + p.sigma2.ln()
            + p.latents
                .as_slice()
                .iter()
                .map(|&z| 0.5 * (z.ln() + (-z).ln_1p()))
                .sum::<f64>()
    };
    let log_ratio = target.log_density(&candidate) + ln_chart(&candidate) + ln_reverse
        - target.log_density(state)
        - ln_chart(state)
        - ln_forward
        + ln_q_ratio;
    if metropolis_accept(log_ratio, rng) {
        *cache = Some(GridCache {
            weights: candidate.weights.as_slice().to_vec(),
            sigma2: candidate.sigma2,
            grids: forward,
        });
        Ok((candidate, true))
    } else {
        reject(cache, current)
    }
}

/// Running minimum of `mu_i (1 - mu_i)` with its position, so that one
/// latent can change without rescanning every observation.
struct BoundTracker {
    spread: Vec<f64>,
    min: f64,
    argmin: Option<usize>,
}

impl BoundTracker {
    fn new(means: &[f64]) -> Self {
        let spread: Vec<f64> = means.iter().map(|m| m * (1.0 - m)).collect();
        let mut t = BoundTracker {
            spread,
            min: MAX_BERNOULLI_VARIANCE,
            argmin: None,
        };
        t.rescan();
        t
    }

    fn rescan(&mut self) {
        self.min = MAX_BERNOULLI_VARIANCE;
        self.argmin = None;
        for (i, &s) in self.spread.iter().enumerate() {
            if s < self.min {
                self.min = s;
                self.argmin = Some(i);
            }
        }
    }

    /// Minimum over every observation except `i`.
    fn min_excluding(&self, i: usize) -> f64 {
        if self.argmin != Some(i) {
            return self.min;
        }
        self.spread
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(MAX_BERNOULLI_VARIANCE, |acc, (_, &s)| acc.min(s))
    }

    fn set(&mut self, i: usize, spread: f64) {
        let was_min = self.argmin == Some(i);
        self.spread[i] = spread;
        if spread < self.min {
            self.min = spread;
            self.argmin = Some(i);
        } else if was_min {
            self.rescan();
        }
    }
}

#[inline]
fn logit(z: f64) -> f64 {
    z.ln() - (-z).ln_1p()
}

#[inline]
fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Scalar updates of every latent score, in index order.
///
/// Each `z_i` moves by a Gaussian random walk of scale `steps[i]` on its
/// logit. The conditional target is the observation's likelihood times the
/// Beta(1/2, 1/2) prior, times the `sigma2` prior factor, which depends on
/// `z_i` through the truncation bound.
pub fn update_latents(
    state: &ModelParams,
    target: &Target,
    rng: &mut ChainRng,
    steps: &[f64],
) -> Result<(ModelParams, Vec<bool>)> {
    let order: Vec<usize> = (0..target.data.n()).collect();
    update_latents_ordered(state, target, rng, steps, &order)
}

/// [`update_latents`] visiting observations in the given order. Returns the
/// new state and, per observation index, whether its move was accepted.
pub fn update_latents_ordered(
    state: &ModelParams,
    target: &Target,
    rng: &mut ChainRng,
    steps: &[f64],
    order: &[usize],
) -> Result<(ModelParams, Vec<bool>)> {
    check_state(state, target)?;
    let data = target.data;
    let n = data.n();
    if steps.len() != n {
        return Err(Error::invalid(format!("{} latent steps for {n} latents", steps.len())));
    }
    if order.iter().any(|&i| i >= n) {
        return Err(Error::invalid("latent update order has an out-of-range index"));
    }
    let w = state.weights.as_slice();
    let k = data.k();
    let latent_weight = w[k];
    let sigma2 = state.sigma2;
    let mut next = state.clone();
    let z = next.latents.as_mut_slice();

    // attribute part of each mean is fixed during this block
    let base: Vec<f64> = data
        .rows()
        .map(|x| model::linear_mean(w, x, 0.0))
        .collect();
    let means: Vec<f64> = base.iter().zip(z.iter()).map(|(b, zi)| b + latent_weight * zi).collect();
    let mut bound = BoundTracker::new(&means);
    let mut accepted = vec![false; n];

    let conditional = |i: usize, zi: f64, mu: f64, others: f64| -> f64 {
        let spread = mu * (1.0 - mu);
        let mut lp = ln_arcsine_pdf(zi) + target.ln_variance_prior(sigma2, others.min(spread));
        if target.likelihood && lp.is_finite() {
            lp += obs_ln_lik(data.y()[i], mu, sigma2);
        }
        lp
    };

    for &i in order {
        let step = steps[i];
        let noise: f64 = rng.sample(StandardNormal);
        if step == 0.0 {
            accepted[i] = true;
            continue;
        }
        let current = z[i];
        let proposed = logistic(logit(current) + step * noise);
        if !(proposed > 0.0 && proposed < 1.0) {
            continue;
        }
        let others = bound.min_excluding(i);
        let mu_cur = base[i] + latent_weight * current;
        let mu_new = base[i] + latent_weight * proposed;
        // dz/du = z (1 - z)
        let log_ratio = conditional(i, proposed, mu_new, others)
            + proposed.ln()
            + (-proposed).ln_1p()
            - conditional(i, current, mu_cur, others)
            - current.ln()
            - (-current).ln_1p();
        if metropolis_accept(log_ratio, rng) {
            z[i] = proposed;
            bound.set(i, mu_new * (1.0 - mu_new));
            accepted[i] = true;
        }
    }
    Ok((next, accepted))
}

/// Random walk of scale `step` on `ln sigma2`; proposals at or above the
/// truncation bound are rejected.
pub fn update_sigma2(
    state: &ModelParams,
    target: &Target,
    rng: &mut ChainRng,
    step: f64,
) -> Result<(ModelParams, bool)> {
    check_state(state, target)?;
    let noise: f64 = rng.sample(StandardNormal);
    if step == 0.0 {
        return Ok((state.clone(), true));
    }
    let proposed = state.sigma2 * (step * noise).exp();
    let means = state.means(target.data)?;
    let bound = truncation_bound(&means);
    if !(proposed > 0.0 && proposed < bound) {
        return Ok((state.clone(), false));
    }
    let ln_target = |s2: f64| -> f64 {
        let mut lp = target.ln_variance_prior(s2, bound);
        if target.likelihood && lp.is_finite() {
            lp += target
                .data
                .y()
                .iter()
                .zip(&means)
                .map(|(&y, &mu)| obs_ln_lik(y, mu, s2))
                .sum::<f64>();
        }
        lp
    };
    // d sigma2 / d ln sigma2 = sigma2
    let log_ratio = ln_target(proposed) + proposed.ln() - ln_target(state.sigma2) - state.sigma2.ln();
    if metropolis_accept(log_ratio, rng) {
        let mut next = state.clone();
        next.sigma2 = proposed;
        Ok((next, true))
    } else {
        Ok((state.clone(), false))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSizes {
    pub latents: Vec<f64>,
    /// Scale of the joint random walk.
    pub joint: f64,
    /// Covariance factor of the joint moves, estimated during burn-in.
    pub joint_shape: ProposalShape,
    /// Centre of the joint independence proposal; `None` until estimated.
    pub joint_center: Option<Vec<f64>>,
}

impl StepSizes {
    fn walk(&self) -> JointProposal {
        JointProposal::RandomWalk {
            step: self.joint,
            shape: self.joint_shape.clone(),
        }
    }

    fn independence(&self) -> Option<JointProposal> {
        self.joint_center.as_ref().map(|mean| JointProposal::Independence {
            mean: mean.clone(),
            shape: self.joint_shape.scaled(INDEPENDENCE_INFLATION),
        })
    }
}

impl StepSizes {
    fn initial(k: usize, n: usize) -> Self {
        StepSizes {
            latents: vec![1.0; n],
            joint: 0.1,
            joint_shape: ProposalShape::identity(k + 1),
            joint_center: None,
        }
    }
}

/// Post-burn-in acceptance rates per block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AcceptanceRates {
    /// Independence proposals of the weights from the prior.
    pub weights_prior: f64,
    /// Joint random-walk moves of the weights, `sigma2` and the latents.
    pub joint_walk: f64,
    /// Joint independence moves, made on alternate iterations once burn-in
    /// has estimated their proposal.
    pub joint_independence: f64,
    /// Scalar latent moves, averaged over observations.
    pub latents: f64,
}

#[derive(Clone, Debug)]
pub struct Chain {
    pub draws: Vec<ModelParams>,
    pub config: SamplerConfig,
    pub acceptance: AcceptanceRates,
    pub model_kind: ModelKind,
    /// Step sizes in force when burn-in ended.
    pub adapted_steps: StepSizes,
    /// Step sizes at the last iteration; equal to `adapted_steps`.
    pub final_steps: StepSizes,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Number of weights, `k + 1`.
    pub fn weight_count(&self) -> usize {
        self.draws.first().map_or(0, |d| d.weights.len())
    }

    /// Draws of one weight component.
    pub fn weight_trace(&self, l: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.weights.as_slice()[l]).collect()
    }

    pub fn sigma2_trace(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.sigma2).collect()
    }
}

/// Initial state: uniform weights, latents copied from the responses and
/// clamped to `[0.01, 0.99]`, and `sigma2` at half the truncation bound.
pub fn initial_state(data: &Dataset) -> Result<ModelParams> {
    let weights = WeightVector::uniform(data.k() + 1);
    let latents = LatentVector::new(data.y().iter().map(|y| y.clamp(0.01, 0.99)).collect())
        .map_err(|e| Error::Initialization(e.to_string()))?;
    let w = weights.as_slice();
    let means: Vec<f64> = data
        .rows()
        .zip(latents.as_slice())
        .map(|(x, &z)| model::linear_mean(w, x, z))
        .collect();
    let sigma2 = 0.5 * truncation_bound(&means);
    let params = ModelParams::new(weights, latents, sigma2)
        .map_err(|e| Error::Initialization(e.to_string()))?;
    if !check_support(&params, data) {
        return Err(Error::Initialization(
            "initial state is outside the support".into(),
        ));
    }
    Ok(params)
}

/// Iterations between re-estimates of the joint proposal during burn-in.
const SHAPE_INTERVAL: usize = 250;

/// Scale of the joint independence proposal relative to the posterior
/// spread estimated in burn-in; above one so its tails cover the target's.
const INDEPENDENCE_INFLATION: f64 = 1.3;

/// Log-ratio weight coordinates followed by `ln sigma2`.
fn chart_coords(state: &ModelParams) -> Result<Vec<f64>> {
    let mut c = alr_transform(&state.weights)?;
    c.push(state.sigma2.ln());
    Ok(c)
}

/// Robbins-Monro step on the log scale.
#[inline]
fn adapt(step: &mut f64, accepted: bool, target: f64, gain: f64) {
    let signal = if accepted { 1.0 } else { 0.0 } - target;
    *step = (step.ln() + gain * signal).exp().clamp(1e-6, 50.0);
}

/// Runs one chain for a model on the rows it selects from `data`.
pub fn run_chain(data: &Dataset, model_kind: ModelKind, config: &SamplerConfig) -> Result<Chain> {
    config.validate()?;
    let group = match model_kind {
        ModelKind::Joint => data.clone(),
        ModelKind::Separated(p) => {
            if data.is_empty() && !config.likelihood {
                data.clone()
            } else {
                data.group(p)?
            }
        }
    };
    if group.is_empty() {
        if config.likelihood {
            return Err(Error::EmptyDataset(format!(
                "{} model has no observations",
                model_kind.label()
            )));
        }
    } else {
        group.check_groups()?;
    }
    let target = Target {
        data: &group,
        likelihood: config.likelihood,
        norm: config.truncation_norm,
    };
    let mut rng = chain_rng(config.seed);
    let mut state = initial_state(&group)?;
    let n = group.n();
    let mut steps = StepSizes::initial(group.k(), n);
    let mut adapted_steps = steps.clone();

    let mut draws = Vec::with_capacity(config.draw_count());
    let (mut acc_p, mut acc_c, mut acc_z) = (0usize, 0usize, 0usize);
    let (mut acc_i, mut tried_i) = (0usize, 0usize);
    let adapting = config.adapt_during_burnin;
    let mut history = Vec::new();
    let mut grid_cache = None;
    let mut walk = steps.walk();
    let mut independence = steps.independence();

    for t in 0..config.iterations {
        let in_burnin = t < config.burnin;
        let gain = ((t + 1) as f64).powf(-0.6);

        let (next, ok_p) = update_weights_from_prior(&state, &target, &mut rng)?;
        state = next;
        let (next, ok_c) = collapsed_move(&state, &target, &mut rng, &walk, &mut grid_cache)?;
        state = next;
        let ok_i = match (&independence, t % 2) {
            (Some(proposal), 1) => {
                let (next, ok) = collapsed_move(&state, &target, &mut rng, proposal, &mut grid_cache)?;
                state = next;
                Some(ok)
            }
            _ => None,
        };
        let (next, ok_z) = update_latents(&state, &target, &mut rng, &steps.latents)?;
        state = next;

        if in_burnin {
            if adapting {
                for (s, &ok) in steps.latents.iter_mut().zip(&ok_z) {
                    adapt(s, ok, config.target_acceptance, gain);
                }
                adapt(&mut steps.joint, ok_c, config.target_acceptance_weights, gain);
                history.push(chart_coords(&state)?);
                if (t + 1) % SHAPE_INTERVAL == 0 && t + 1 < config.burnin {
                    // the first half of burn-in so far is treated as transient
                    if let Some((mean, shape)) = ProposalShape::fit(&history[history.len() / 2..]) {
                        steps.joint_shape = shape;
                        steps.joint_center = Some(mean);
                    }
                }
                walk = steps.walk();
                independence = steps.independence();
            }
            if t + 1 == config.burnin {
                adapted_steps = steps.clone();
            }
            continue;
        }

        acc_p += ok_p as usize;
        acc_z += ok_z.iter().filter(|&&a| a).count();
        acc_c += ok_c as usize;
        if let Some(ok) = ok_i {
            acc_i += ok as usize;
            tried_i += 1;
        }
        if (t + 1 - config.burnin) % config.thin == 0 {
            if !check_support(&state, &group) {
                return Err(Error::support(format!(
                    "draw at iteration {t} left the support"
                )));
            }
            draws.push(state.clone());
        }
    }
    if config.burnin == 0 {
        adapted_steps = StepSizes::initial(group.k(), n);
    }
    debug_assert_eq!(adapted_steps, steps);

    let kept = (config.iterations - config.burnin) as f64;
    let acceptance = AcceptanceRates {
        weights_prior: acc_p as f64 / kept,
        latents: if n == 0 { 0.0 } else { acc_z as f64 / (kept * n as f64) },
        joint_walk: acc_c as f64 / kept,
        joint_independence: if tried_i == 0 { 0.0 } else { acc_i as f64 / tried_i as f64 },
    };
    Ok(Chain {
        draws,
        config: config.clone(),
        acceptance,
        model_kind,
        adapted_steps,
        final_steps: steps,
    })
}

/// Fits each period independently, period 1 with `config.seed` and period 2
/// with `config.seed + 1`, on two threads.
pub fn run_separated_pair(data: &Dataset, config: &SamplerConfig) -> Result<(Chain, Chain)> {
    let present = data.periods_present();
    for p in [1, 2] {
        if !present.contains(&p) {
            return Err(Error::invalid(format!("period {p} is missing from the data")));
        }
    }
    let second = SamplerConfig {
        seed: config.seed.wrapping_add(1),
        ..config.clone()
    };
    let (a, b) = std::thread::scope(|s| {
        let h1 = s.spawn(|| run_chain(data, ModelKind::Separated(1), config));
        let h2 = s.spawn(|| run_chain(data, ModelKind::Separated(2), &second));
        (
            h1.join().expect("period 1 sampler panicked"),
            h2.join().expect("period 2 sampler panicked"),
        )
    });
    Ok((a?, b?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_data() -> Dataset {
        Dataset::new(
            vec![vec![0.2, 0.8], vec![0.6, 0.4], vec![0.9, 0.7], vec![0.3, 0.1]],
            vec![0.45, 0.5, 0.8, 0.2],
            vec![1, 1, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn alr_examples() {
        let u = alr_transform(&WeightVector::uniform(3)).unwrap();
        assert!(u.iter().all(|v| v.abs() < 1e-15));
        let u = alr_transform(&WeightVector::new(vec![0.5, 0.25, 0.25]).unwrap()).unwrap();
        assert!((u[0] - 2f64.ln()).abs() < 1e-15 && u[1].abs() < 1e-15);
        let zero = WeightVector::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert!(matches!(alr_transform(&zero), Err(Error::Boundary(_))));
    }

    proptest! {
        #[test]
        fn alr_round_trip(raw in prop::collection::vec(0.001f64..1.0, 2..12)) {
            let s: f64 = raw.iter().sum();
            let w = WeightVector::new(raw.iter().map(|v| v / s).collect()).unwrap();
            let back = alr_inverse(&alr_transform(&w).unwrap());
            for (a, b) in w.as_slice().iter().zip(back.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_steps_leave_state_unchanged() {
        let data = small_data();
        let target = Target::posterior(&data);
        let state = initial_state(&data).unwrap();
        let mut rng = chain_rng(3);
        let (s, ok) = update_weights(&state, &target, &mut rng, 0.0).unwrap();
        assert!(ok && s == state);
        let (s, ok) = update_latents(&state, &target, &mut rng, &[0.0; 4]).unwrap();
        assert!(ok.iter().all(|&a| a) && s == state);
        let (s, ok) = update_sigma2(&state, &target, &mut rng, 0.0).unwrap();
        assert!(ok && s == state);
    }

    #[test]
    fn sigma2_proposal_beyond_bound_rejected() {
        let data = small_data();
        let target = Target::posterior(&data);
        let state = initial_state(&data).unwrap();
        // a huge step makes almost every proposal cross the bound or collapse
        let mut rng = chain_rng(11);
        let bound = truncation_bound(&state.means(&data).unwrap());
        for _ in 0..200 {
            let (s, ok) = update_sigma2(&state, &target, &mut rng, 1e3).unwrap();
            assert!(s.sigma2 < bound);
            if !ok {
                assert_eq!(s, state);
            }
        }
    }

    #[test]
    fn every_update_keeps_support() {
        let data = small_data();
        let target = Target::posterior(&data);
        let mut state = initial_state(&data).unwrap();
        let mut rng = chain_rng(5);
        for _ in 0..500 {
            state = update_weights(&state, &target, &mut rng, 1.5).unwrap().0;
            assert!(check_support(&state, &data));
            state = update_latents(&state, &target, &mut rng, &[2.0; 4]).unwrap().0;
            assert!(check_support(&state, &data));
            state = update_sigma2(&state, &target, &mut rng, 1.0).unwrap().0;
            assert!(check_support(&state, &data));
        }
    }

    #[test]
    fn draw_count_and_determinism() {
        let data = small_data();
        let config = SamplerConfig {
            iterations: 700,
            burnin: 200,
            thin: 3,
            seed: 42,
            ..Default::default()
        };
        let a = run_chain(&data, ModelKind::Joint, &config).unwrap();
        let b = run_chain(&data, ModelKind::Joint, &config).unwrap();
        assert_eq!(a.len(), 500 / 3);
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.adapted_steps, a.final_steps);
        for d in &a.draws {
            assert!(check_support(d, &data));
        }
    }

    #[test]
    fn empty_group_is_an_error() {
        let data = small_data();
        let config = SamplerConfig::with_protocol(10, 5, 1);
        assert!(run_chain(&data, ModelKind::Separated(2), &config).is_err());
        assert!(matches!(
            run_chain(&Dataset::empty(2).unwrap(), ModelKind::Joint, &config),
            Err(Error::EmptyDataset(_))
        ));
        assert!(matches!(
            run_separated_pair(&data, &config),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::with_protocol(10, 10, 1).validate().is_err());
        let c = SamplerConfig {
            thin: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert_eq!(SamplerConfig::default().draw_count(), 2000);
    }

    #[test]
    fn bound_tracker_matches_rescan() {
        let means = [0.3, 0.1, 0.5, 0.9, 0.2];
        let mut t = BoundTracker::new(&means);
        assert_eq!(t.argmin, Some(3));
        assert!((t.min_excluding(3) - 0.09).abs() < 1e-15);
        t.set(3, 0.2);
        assert_eq!(t.argmin, Some(1));
        t.set(0, 0.01);
        assert_eq!(t.argmin, Some(0));
        assert!((t.min - 0.01).abs() < 1e-15);
    }
}
