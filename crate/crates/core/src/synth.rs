//! Synthetic data from the model's generative process, and a deterministic
//! quadrature oracle for the posterior of tiny instances.
//!
//! The oracle shares no code with the sampler or with `model`: it evaluates
//! the beta density and the shape formulas on its own.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::model::{Dataset, LatentVector, Period, TruncationNorm, WeightVector};
use crate::sampler::chain_rng;

/// Responses outside `(BOUNDARY_LOW, BOUNDARY_HIGH)` are discarded.
pub const BOUNDARY_LOW: f64 = 0.001;
pub const BOUNDARY_HIGH: f64 = 0.999;

/// How attribute scores are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XLaw {
    /// Independent uniform on `{0, 1/(levels-1), ..., 1}`.
    Ordinal { levels: u32 },
    /// Independent uniform on `[0, 1]`.
    Continuous,
    /// Every score equal to the given value.
    Constant(f64),
}

impl Default for XLaw {
    fn default() -> Self {
        XLaw::Ordinal { levels: 11 }
    }
}

impl XLaw {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            XLaw::Ordinal { levels } => {
                let top = levels - 1;
                rng.random_range(0..=top) as f64 / top as f64
            }
            XLaw::Continuous => rng.random::<f64>(),
            XLaw::Constant(v) => v,
        }
    }
}

/// Generating parameters of a synthetic survey.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub weights: WeightVector,
    /// Weights of period 2 when they differ from period 1.
    pub weights_period2: Option<WeightVector>,
    pub sigma2: f64,
    pub n_per_group: usize,
    /// Number of periods generated, 1 or 2.
    pub periods: u8,
    pub x_law: XLaw,
}

impl Truth {
    pub fn new(weights: WeightVector, sigma2: f64, n_per_group: usize, periods: u8) -> Self {
        Truth {
            weights,
            weights_period2: None,
            sigma2,
            n_per_group,
            periods,
            x_law: XLaw::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.weights.k()
    }

    pub fn weights_for(&self, period: Period) -> &WeightVector {
        match (period, &self.weights_period2) {
            (2, Some(w)) => w,
            _ => &self.weights,
        }
    }

    /// Smallest `mu (1 - mu)` over the attribute support with the latent at
    /// its prior mean 1/2. Attained at a corner: every score 0 or every score 1.
    fn min_spread(w: &WeightVector) -> f64 {
        let k = w.k();
        let latent = 0.5 * w.latent();
        let attr: f64 = w.as_slice()[..k].iter().sum();
        [latent, attr + latent]
            .iter()
            .map(|m| m * (1.0 - m))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_group == 0 {
            return Err(Error::invalid("n_per_group must be positive"));
        }
        if !matches!(self.periods, 1 | 2) {
            return Err(Error::invalid("periods must be 1 or 2"));
        }
        if let Some(w2) = &self.weights_period2 {
            if w2.len() != self.weights.len() {
                return Err(Error::invalid("period weight vectors differ in length"));
            }
        }
        match self.x_law {
            XLaw::Ordinal { levels } if levels < 2 => {
                return Err(Error::invalid("ordinal x law needs at least 2 levels"))
            }
            XLaw::Constant(v) if !(0.0..=1.0).contains(&v) => {
                return Err(Error::invalid("constant score must lie in [0, 1]"))
            }
            _ => {}
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid("sigma2 must be positive"));
        }
        for p in 1..=self.periods {
            let bound = 0.9 * Self::min_spread(self.weights_for(p));
            if self.sigma2 >= bound {
                return Err(Error::InfeasibleTruth(format!(
                    "sigma2 = {} is not below 0.9 x min mu(1-mu) = {bound} for period {p}",
                    self.sigma2
                )));
            }
        }
        Ok(())
    }
}

/// Draws a dataset from `truth`. Returns the data and the latent scores that
/// generated each row.
pub fn generate_dataset(truth: &Truth, seed: u64) -> Result<(Dataset, LatentVector)> {
    truth.validate()?;
    generate_rows(truth, seed)
}

fn generate_rows(truth: &Truth, seed: u64) -> Result<(Dataset, LatentVector)> {
    let mut rng = chain_rng(seed);
    let k = truth.k();
    let latent_law = Beta::new(0.5, 0.5).expect("valid beta parameters");
    let total = truth.n_per_group * truth.periods as usize;
    let (mut x, mut y, mut z, mut period) = (
        Vec::with_capacity(total * k),
        Vec::with_capacity(total),
        Vec::with_capacity(total),
        Vec::with_capacity(total),
    );
    let (mut attempts, mut rejected) = (0usize, 0usize);
    let mut row = vec![0.0; k];

    for p in 1..=truth.periods {
        let w = truth.weights_for(p).as_slice();
        let mut made = 0;
        while made < truth.n_per_group {
            attempts += 1;
            if attempts >= 1000 && rejected as f64 > 0.99 * attempts as f64 {
                return Err(Error::InfeasibleTruth(format!(
                    "{rejected} of {attempts} generated rows rejected"
                )));
            }
            for v in row.iter_mut() {
                *v = truth.x_law.draw(&mut rng);
            }
            let zi: f64 = latent_law.sample(&mut rng);
            if !(zi > 0.0 && zi < 1.0) {
                rejected += 1;
                continue;
            }
            let mu: f64 = w[..k].iter().zip(&row).map(|(a, b)| a * b).sum::<f64>() + w[k] * zi;
            let spread = mu * (1.0 - mu);
            if truth.sigma2 >= spread {
                rejected += 1;
                continue;
            }
            let r = (spread - truth.sigma2) / truth.sigma2;
            let yi: f64 = match Beta::new(mu * r, (1.0 - mu) * r) {
                Ok(law) => law.sample(&mut rng),
                Err(_) => {
                    rejected += 1;
                    continue;
                }
            };
            if !(yi > BOUNDARY_LOW && yi < BOUNDARY_HIGH) {
                rejected += 1;
                continue;
            }
            x.extend_from_slice(&row);
            y.push(yi);
            z.push(zi);
            period.push(p);
            made += 1;
        }
    }
    Ok((Dataset::from_flat(k, x, y, period)?, LatentVector::new(z)?))
}

/// Posterior moments produced by [`grid_oracle_posterior`].
#[derive(Clone, Debug, PartialEq)]
pub struct OracleMoments {
    pub weight_means: Vec<f64>,
    pub sigma2_mean: f64,
}

pub const ORACLE_MAX_OBS: usize = 4;
pub const ORACLE_MIN_RESOLUTION: usize = 40;

/// [`grid_oracle_posterior_with`] including the `-ln m` prior normalization.
pub fn grid_oracle_posterior(data: &Dataset, resolution: usize) -> Result<OracleMoments> {
    grid_oracle_posterior_with(data, resolution, TruncationNorm::Include)
}

/// Beta log-density from the unfactored mean/variance formulas.
fn oracle_ln_density(y: f64, mu: f64, sigma2: f64) -> f64 {
    let a = ((1.0 - mu) * mu * mu - mu * sigma2) / sigma2;
    let b = (1.0 - mu) * (mu - mu * mu - sigma2) / sigma2;
    if !(a > 0.0 && b > 0.0) {
        // rounding at the truncation edge
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * y.ln() + (b - 1.0) * (1.0 - y).ln() - ln_beta(a, b)
}

/// Composite trapezoid weights on `nodes` equally spaced points (unit spacing).
fn trapezoid(nodes: usize) -> Vec<f64> {
    let mut t = vec![1.0; nodes];
    t[0] = 0.5;
    t[nodes - 1] = 0.5;
    t
}

/// Barycentric grid `(i, j, r - i - j) / r` on the 2-simplex with the weights
/// of piecewise-linear quadrature on its uniform triangulation.
fn simplex_grid(r: usize) -> Vec<([f64; 3], f64)> {
    let idx = |i: usize, j: usize| -> usize {
        // row-major over i, with j in 0..=r-i
        (0..i).map(|ii| r - ii + 1).sum::<usize>() + j
    };
    let mut weight = vec![0.0; (r + 1) * (r + 2) / 2];
    for i in 0..r {
        for j in 0..r - i {
            for (a, b) in [(i, j), (i + 1, j), (i, j + 1)] {
                weight[idx(a, b)] += 1.0;
            }
            if i + j + 2 <= r {
                for (a, b) in [(i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                    weight[idx(a, b)] += 1.0;
                }
            }
        }
    }
    let rf = r as f64;
    let mut out = Vec::with_capacity(weight.len());
    for i in 0..=r {
        for j in 0..=r - i {
            let w = [i as f64 / rf, j as f64 / rf, (r - i - j) as f64 / rf];
            out.push((w, weight[idx(i, j)]));
        }
    }
    out
}

/// Posterior means of the three weights and of `sigma2` for `k = 2` and at
/// most four observations, by tensor-product trapezoid quadrature.
///
/// The weights run over a barycentric grid of `resolution` divisions, each
/// latent over `2 resolution + 1` nodes in the angle `theta` with
/// `z = sin^2 theta` (the Beta(1/2, 1/2) prior is uniform in `theta`), and
/// `sigma2` over `4 resolution` nodes of `(0, 1/4]`. For each weight and
/// variance node the sum over the latent tensor grid is carried out exactly
/// by sorting the per-observation spreads `mu (1 - mu)`, since the integrand
/// couples the latents only through their minimum.
pub fn grid_oracle_posterior_with(
    data: &Dataset,
    resolution: usize,
    norm: TruncationNorm,
) -> Result<OracleMoments> {
    if data.k() != 2 {
        return Err(Error::invalid(format!(
            "grid oracle supports k = 2 only, got k = {}",
            data.k()
        )));
    }
    if data.n() > ORACLE_MAX_OBS {
        return Err(Error::invalid(format!(
            "grid oracle supports at most {ORACLE_MAX_OBS} observations, got {}",
            data.n()
        )));
    }
    if resolution < ORACLE_MIN_RESOLUTION {
        return Err(Error::invalid(format!(
            "grid resolution must be at least {ORACLE_MIN_RESOLUTION}"
        )));
    }
    let n = data.n();
    let nz = 2 * resolution + 1;
    let ns = 4 * resolution;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let z_nodes: Vec<f64> = (0..nz)
        .map(|g| (half_pi * g as f64 / (nz - 1) as f64).sin().powi(2))
        .collect();
    let z_weights = trapezoid(nz);
    // sigma2 = 0 carries zero density, so only nodes 1..=ns are evaluated
    let s_nodes: Vec<f64> = (1..=ns).map(|r| 0.25 * r as f64 / ns as f64).collect();
    let s_weights: Vec<f64> = trapezoid(ns + 1)[1..].to_vec();
    let rows: Vec<(f64, f64, f64)> = (0..n)
        .map(|i| (data.row(i)[0], data.row(i)[1], data.y()[i]))
        .collect();

    let grid = simplex_grid(resolution);
    // (mass, mass * sigma2) at each simplex node, in grid order
    let per_node: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|(w, _)| {
            // entries (spread, observation, latent node), sorted by spread descending
            let mut entries: Vec<(f64, usize, usize, f64)> = Vec::with_capacity(n * nz);
            for (i, &(x1, x2, _)) in rows.iter().enumerate() {
                for (g, &z) in z_nodes.iter().enumerate() {
                    let mu = w[0] * x1 + w[1] * x2 + w[2] * z;
                    entries.push((mu * (1.0 - mu), i, g, mu));
                }
            }
            entries.sort_by(|a, b| b.0.total_cmp(&a.0));

            let mut mass = 0.0;
            let mut moment = 0.0;
            let mut cumulative = vec![0.0; n];
            for (&s2, &ws) in s_nodes.iter().zip(&s_weights) {
                let tensor_sum = if n == 0 {
                    match norm {
                        TruncationNorm::Include => 1.0 / 0.25,
                        TruncationNorm::Omit => 1.0,
                    }
                } else {
                    cumulative.iter_mut().for_each(|c| *c = 0.0);
                    let mut total = 0.0;
                    for &(spread, i, g, mu) in &entries {
                        if spread <= s2 {
                            break;
                        }
                        let c = z_weights[g] * oracle_ln_density(rows[i].2, mu, s2).exp();
                        if norm == TruncationNorm::Include {
                            // this entry is the minimum spread when every other
                            // observation takes an earlier (larger) entry
                            let others: f64 = (0..n).filter(|&j| j != i).map(|j| cumulative[j]).product();
                            total += c * others / spread;
                        }
                        cumulative[i] += c;
                    }
                    match norm {
                        TruncationNorm::Include => total,
                        TruncationNorm::Omit => cumulative.iter().product(),
                    }
                };
                mass += ws * tensor_sum;
                moment += ws * tensor_sum * s2;
            }
            (mass, moment)
        })
        .collect();

    let mut total = 0.0;
    let mut weight_sums = [0.0; 3];
    let mut sigma2_sum = 0.0;
    for ((w, cell), (mass, moment)) in grid.iter().zip(&per_node) {
        let m = cell * mass;
        total += m;
        for l in 0..3 {
            weight_sums[l] += m * w[l];
        }
        sigma2_sum += cell * moment;
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::invalid("posterior mass on the grid is zero or not finite"));
    }
    Ok(OracleMoments {
        weight_means: weight_sums.iter().map(|s| s / total).collect(),
        sigma2_mean: sigma2_sum / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_grid_weights_integrate_linear_functions() {
        let g = simplex_grid(10);
        assert_eq!(g.len(), 66);
        let total: f64 = g.iter().map(|(_, c)| c).sum();
        // each of the r^2 triangles contributes 3
        assert_eq!(total, 300.0);
        for l in 0..3 {
            let m: f64 = g.iter().map(|(w, c)| w[l] * c).sum::<f64>() / total;
            assert!((m - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn oracle_prior_recovery_without_data() {
        let data = Dataset::empty(2).unwrap();
        let m = grid_oracle_posterior(&data, 40).unwrap();
        for w in &m.weight_means {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_input_guards() {
        assert!(grid_oracle_posterior(&Dataset::empty(3).unwrap(), 40).is_err());
        assert!(grid_oracle_posterior(&Dataset::empty(2).unwrap(), 10).is_err());
        let five = Dataset::new(vec![vec![0.5, 0.5]; 5], vec![0.5; 5], vec![1; 5]).unwrap();
        assert!(grid_oracle_posterior(&five, 40).is_err());
    }

    #[test]
    fn truth_validation() {
        let w = WeightVector::new(vec![0.3, 0.2, 0.15, 0.1, 0.05, 0.2]).unwrap();
        assert!(Truth::new(w.clone(), 0.005, 10, 2).validate().is_ok());
        // latent-only corner has mu = 0.1, spread 0.09
        assert!(matches!(
            Truth::new(w.clone(), 0.09, 10, 2).validate(),
            Err(Error::InfeasibleTruth(_))
        ));
        assert!(Truth::new(w, 0.005, 0, 2).validate().is_err());
    }

    #[test]
    fn generation_is_deterministic_and_inside() {
        let w = WeightVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        let truth = Truth::new(w, 0.01, 50, 2);
        let (d1, z1) = generate_dataset(&truth, 9).unwrap();
        let (d2, z2) = generate_dataset(&truth, 9).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(z1, z2);
        assert_eq!(d1.n(), 100);
        assert_eq!(d1.periods_present(), vec![1, 2]);
        assert!(d1.y().iter().all(|&y| y > BOUNDARY_LOW && y < BOUNDARY_HIGH));
        assert!(d1
            .x_flat()
            .iter()
            .all(|&x| ((x * 10.0).round() / 10.0 - x).abs() < 1e-15));
    }

    #[test]
    fn infeasible_generation_reports_error() {
        // mu(1-mu) exceeds sigma2 only for z within 0.01 of 1/2, and the
        // surviving shapes put nearly all mass outside the boundary filter
        let w = WeightVector::new(vec![0.0, 1.0]).unwrap();
        let truth = Truth::new(w, 0.2499, 100, 1);
        assert!(truth.validate().is_err());
        match generate_rows(&truth, 1) {
            Err(Error::InfeasibleTruth(_)) => {}
            other => panic!("expected infeasible truth, got {other:?}"),
        }
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma).powi(2);
            sbb += (y - mb).powi(2);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn latent_only_truth_tracks_latents() {
        let w = WeightVector::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let truth = Truth::new(w, 1e-4, 1000, 1);
        let (data, z) = generate_dataset(&truth, 3).unwrap();
        let rho = correlation(data.y(), z.as_slice());
        assert!(rho > 0.99, "correlation {rho}");
    }

    #[test]
    fn monte_carlo_mean_matches_analytic_mean() {
        // mu = 0.7 (0.3 + 0.2) + 0.5 z, and E z = 1/2 under Beta(1/2, 1/2);
        // the spread stays above 0.18 so neither filter is active in practice
        let w = WeightVector::new(vec![0.3, 0.2, 0.5]).unwrap();
        let mut truth = Truth::new(w, 0.01, 100_000, 1);
        truth.x_law = XLaw::Constant(0.7);
        let (data, _) = generate_dataset(&truth, 11).unwrap();
        let y = data.y();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let expected = 0.7 * 0.5 + 0.5 * 0.5;
        assert!((mean - expected).abs() < 3.0 * sd / n.sqrt(), "mean {mean}");
    }

    #[test]
    fn x_law_guards() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let mut truth = Truth::new(w, 0.01, 10, 1);
        truth.x_law = XLaw::Ordinal { levels: 1 };
        assert!(truth.validate().is_err());
        truth.x_law = XLaw::Constant(1.5);
        assert!(truth.validate().is_err());
    }

    fn tiny_symmetric() -> Dataset {
        let x = vec![vec![0.2, 0.2], vec![0.6, 0.6], vec![0.9, 0.9], vec![0.4, 0.4]];
        Dataset::new(x, vec![0.3, 0.55, 0.8, 0.45], vec![1; 4]).unwrap()
    }

    #[test]
    fn oracle_is_symmetric_in_identical_columns() {
        let m = grid_oracle_posterior(&tiny_symmetric(), 40).unwrap();
        assert!((m.weight_means[0] - m.weight_means[1]).abs() < 1e-3, "{m:?}");
        let total: f64 = m.weight_means.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(m.weight_means.iter().all(|&w| w > 0.0 && w < 1.0));
        assert!(m.sigma2_mean > 0.0 && m.sigma2_mean < 0.25);
    }

    #[test]
    fn oracle_converges_under_refinement() {
        let data = Dataset::new(
            vec![vec![0.1, 0.8], vec![0.7, 0.3]],
            vec![0.6, 0.4],
            vec![1; 2],
        )
        .unwrap();
        for norm in [TruncationNorm::Include, TruncationNorm::Omit] {
            let coarse = grid_oracle_posterior_with(&data, 40, norm).unwrap();
            let fine = grid_oracle_posterior_with(&data, 80, norm).unwrap();
            for (a, b) in coarse.weight_means.iter().zip(&fine.weight_means) {
                assert!((a - b).abs() < 5e-3, "{coarse:?} vs {fine:?}");
            }
            assert!((coarse.sigma2_mean - fine.sigma2_mean).abs() < 5e-3);
        }
    }

    #[test]
    fn oracle_is_deterministic() {
        let a = grid_oracle_posterior(&tiny_symmetric(), 40).unwrap();
        let b = grid_oracle_posterior(&tiny_symmetric(), 40).unwrap();
        assert_eq!(a, b);
    }
}
