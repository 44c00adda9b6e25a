mod common;

use betaqual::diagnostics::weight_differences;
use betaqual::model::{self, Dataset, LatentVector, ModelParams, WeightVector};
use betaqual::sampler::{
    chain_rng, initial_state, run_chain, run_separated_pair, update_collapsed, update_latents,
    update_latents_ordered, update_sigma2, update_weights, JointProposal, ModelKind,
    ProposalShape, SamplerConfig, Target,
};
use betaqual::synth::grid_oracle_posterior;
use common::{arcsine_cdf, ks_critical_001, ks_statistic, mean_and_mcse};

fn prior_config(iterations: usize, burnin: usize, seed: u64) -> SamplerConfig {
    SamplerConfig {
        likelihood: false,
        ..SamplerConfig::with_protocol(iterations, burnin, seed)
    }
}

#[test]
fn prior_weight_means_without_data() {
    let k = 5;
    let data = Dataset::empty(k).unwrap();
    let chain = run_chain(&data, ModelKind::Joint, &prior_config(25_000, 5_000, 17)).unwrap();
    assert_eq!(chain.len(), 20_000);
    for l in 0..=k {
        let (mean, se) = mean_and_mcse(&chain.weight_trace(l));
        let target = 1.0 / (k + 1) as f64;
        assert!(
            (mean - target).abs() < 3.0 * se,
            "w{}: mean {mean}, se {se}",
            l + 1
        );
    }
}

#[test]
fn prior_weight_means_with_covariates() {
    // the variance prior is normalized, so the weight marginal is still flat
    let x = vec![vec![0.1, 0.9, 0.4], vec![0.7, 0.2, 0.5], vec![0.3, 0.3, 1.0]];
    let data = Dataset::new(x, vec![0.4, 0.6, 0.5], vec![1; 3]).unwrap();
    let chain = run_chain(&data, ModelKind::Joint, &prior_config(25_000, 5_000, 3)).unwrap();
    for l in 0..4 {
        let (mean, se) = mean_and_mcse(&chain.weight_trace(l));
        assert!((mean - 0.25).abs() < 3.0 * se, "w{}: mean {mean}, se {se}", l + 1);
    }
}

#[test]
fn latent_conditional_is_the_prior_when_unweighted() {
    let x = vec![vec![0.3, 0.8], vec![0.6, 0.5]];
    let data = Dataset::new(x, vec![0.35, 0.7], vec![1; 2]).unwrap();
    let weights = WeightVector::new(vec![0.6, 0.4, 0.0]).unwrap();
    let mut state = ModelParams::new(weights, LatentVector::new(vec![0.5, 0.5]).unwrap(), 0.01).unwrap();
    let target = Target::posterior(&data);
    let mut rng = chain_rng(5);
    let mut draws = Vec::new();
    for t in 0..200_000 {
        state = update_latents(&state, &target, &mut rng, &[2.5, 2.5]).unwrap().0;
        if t % 10 == 0 {
            draws.push(state.latents.as_slice()[0]);
        }
    }
    let d = ks_statistic(&draws, arcsine_cdf);
    assert!(d < ks_critical_001(draws.len()), "KS {d}");
}

#[test]
fn variance_prior_is_uniform_at_fixed_mean() {
    // every mean equals 1/2, so the truncation bound is 1/4
    let data = Dataset::new(vec![vec![0.5]; 3], vec![0.3, 0.5, 0.7], vec![1; 3]).unwrap();
    let weights = WeightVector::new(vec![1.0, 0.0]).unwrap();
    let latents = LatentVector::new(vec![0.2, 0.5, 0.9]).unwrap();
    let mut state = ModelParams::new(weights, latents, 0.1).unwrap();
    let target = Target::prior(&data);
    let mut rng = chain_rng(8);
    let mut draws = Vec::new();
    for t in 0..200_000 {
        state = update_sigma2(&state, &target, &mut rng, 1.5).unwrap().0;
        if t % 10 == 0 {
            draws.push(state.sigma2);
        }
    }
    let d = ks_statistic(&draws, |s| (s / 0.25).clamp(0.0, 1.0));
    assert!(d < ks_critical_001(draws.len()), "KS {d}");
}

/// Region of the 2-simplex: the index of the largest weight.
fn region(w: &[f64]) -> usize {
    (0..3).fold(0, |best, l| if w[l] > w[best] { l } else { best })
}

#[test]
fn weight_kernel_reaches_the_brute_force_stationary_law() {
    let x = vec![vec![0.9, 0.1], vec![0.8, 0.3], vec![0.2, 0.4]];
    let data = Dataset::new(x, vec![0.75, 0.7, 0.35], vec![1; 3]).unwrap();
    let latents = LatentVector::new(vec![0.6, 0.5, 0.3]).unwrap();
    let sigma2 = 0.01;

    // target probabilities of each region on a fine grid of the conditional
    let r = 600;
    let mut mass = [0.0; 3];
    let mut log_d = Vec::new();
    for i in 1..r {
        for j in 1..r - i {
            let w = vec![i as f64 / r as f64, j as f64 / r as f64, (r - i - j) as f64 / r as f64];
            let p = ModelParams::new(WeightVector::new(w.clone()).unwrap(), latents.clone(), sigma2)
                .unwrap();
            log_d.push((region(&w), model::log_posterior(&p, &data)));
        }
    }
    let top = log_d.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    for (g, l) in &log_d {
        mass[*g] += (l - top).exp();
    }
    let total: f64 = mass.iter().sum();
    let exact: Vec<f64> = mass.iter().map(|m| m / total).collect();

    let target = Target::posterior(&data);
    let mut state = ModelParams::new(WeightVector::uniform(3), latents, sigma2).unwrap();
    let mut rng = chain_rng(21);
    let mut counts = [0usize; 3];
    let steps = 100_000;
    for _ in 0..1000 {
        state = update_weights(&state, &target, &mut rng, 0.8).unwrap().0;
    }
    for _ in 0..steps {
        state = update_weights(&state, &target, &mut rng, 0.8).unwrap().0;
        counts[region(state.weights.as_slice())] += 1;
    }
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(&exact)
            .map(|(&c, p)| (c as f64 / steps as f64 - p).abs())
            .sum::<f64>();
    assert!(tv < 0.02, "total variation {tv}, exact {exact:?}, counts {counts:?}");
}

#[test]
fn latent_update_order_does_not_change_the_stationary_law() {
    let x = vec![vec![0.2, 0.9], vec![0.7, 0.4], vec![0.5, 0.5]];
    let data = Dataset::new(x, vec![0.5, 0.45, 0.6], vec![1; 3]).unwrap();
    let weights = WeightVector::new(vec![0.3, 0.2, 0.5]).unwrap();
    let start = ModelParams::new(weights, LatentVector::new(vec![0.5; 3]).unwrap(), 0.02).unwrap();
    let target = Target::posterior(&data);

    let run = |order: &[usize], seed: u64| -> Vec<Vec<f64>> {
        let mut state = start.clone();
        let mut rng = chain_rng(seed);
        let mut traces = vec![Vec::new(); 3];
        for t in 0..60_000 {
            state = update_latents_ordered(&state, &target, &mut rng, &[1.5; 3], order)
                .unwrap()
                .0;
            if t >= 1000 {
                for (i, tr) in traces.iter_mut().enumerate() {
                    tr.push(state.latents.as_slice()[i]);
                }
            }
        }
        traces
    };
    let forward = run(&[0, 1, 2], 31);
    let reverse = run(&[2, 1, 0], 32);
    for i in 0..3 {
        let (m1, s1) = mean_and_mcse(&forward[i]);
        let (m2, s2) = mean_and_mcse(&reverse[i]);
        let se = (s1 * s1 + s2 * s2).sqrt();
        assert!((m1 - m2).abs() < 4.0 * se, "z{i}: {m1} vs {m2} (se {se})");
    }
}

/// Runs one joint-move kernel alone and compares its weight and variance
/// means with the quadrature posterior.
fn joint_kernel_matches_oracle(proposal: JointProposal, seed: u64) {
    let x = vec![vec![0.8, 0.3], vec![0.4, 0.9], vec![0.6, 0.5]];
    let data = Dataset::new(x, vec![0.7, 0.55, 0.5], vec![1; 3]).unwrap();
    let oracle = grid_oracle_posterior(&data, 40).unwrap();
    let target = Target::posterior(&data);
    let mut state = initial_state(&data).unwrap();
    let mut rng = chain_rng(seed);
    let mut w = vec![Vec::new(); 3];
    let mut s2 = Vec::new();
    for t in 0..300_000 {
        state = update_collapsed(&state, &target, &mut rng, &proposal).unwrap().0;
        if t >= 5_000 {
            for (l, tr) in w.iter_mut().enumerate() {
                tr.push(state.weights.as_slice()[l]);
            }
            s2.push(state.sigma2);
        }
    }
    for l in 0..3 {
        let (mean, se) = mean_and_mcse(&w[l]);
        let gap = (mean - oracle.weight_means[l]).abs();
        assert!(gap < 4.0 * se + 3e-3, "w{}: {mean} vs {} (se {se})", l + 1, oracle.weight_means[l]);
    }
    let (mean, se) = mean_and_mcse(&s2);
    let gap = (mean - oracle.sigma2_mean).abs();
    assert!(gap < 4.0 * se + 5e-4, "sigma2: {mean} vs {} (se {se})", oracle.sigma2_mean);
}

#[test]
fn joint_random_walk_reaches_the_quadrature_posterior() {
    let proposal = JointProposal::RandomWalk {
        step: 0.6,
        shape: ProposalShape::identity(3),
    };
    joint_kernel_matches_oracle(proposal, 61);
}

#[test]
fn joint_independence_move_reaches_the_quadrature_posterior() {
    // a deliberately rough proposal: exactness must not depend on its fit
    let proposal = JointProposal::Independence {
        mean: vec![0.2, -0.1, (0.01f64).ln()],
        shape: ProposalShape::identity(3).scaled(1.5),
    };
    joint_kernel_matches_oracle(proposal, 62);
}

fn duplicated_periods() -> Dataset {
    let x = vec![
        vec![0.2, 0.7],
        vec![0.5, 0.5],
        vec![0.9, 0.6],
        vec![0.4, 0.1],
        vec![0.7, 0.8],
        vec![0.3, 0.3],
    ];
    let y = vec![0.45, 0.5, 0.75, 0.3, 0.7, 0.35];
    let one = Dataset::new(x.clone(), y.clone(), vec![1; 6]).unwrap();
    let two = Dataset::new(x, y, vec![2; 6]).unwrap();
    one.concat(&two).unwrap()
}

#[test]
fn separated_chains_on_identical_periods_are_exchangeable() {
    let data = duplicated_periods();
    let config = SamplerConfig::with_protocol(20_000, 5_000, 40);
    let (a, b) = run_separated_pair(&data, &config).unwrap();
    assert_eq!(a.len(), config.draw_count());
    assert_eq!(b.len(), config.draw_count());
    for l in 0..3 {
        let (m1, s1) = mean_and_mcse(&a.weight_trace(l));
        let (m2, s2) = mean_and_mcse(&b.weight_trace(l));
        let se = (s1 * s1 + s2 * s2).sqrt();
        assert!((m1 - m2).abs() < 3.0 * se, "w{}: {m1} vs {m2} (se {se})", l + 1);
    }
    let diffs = weight_differences(&a, &b).unwrap();
    assert_eq!(diffs.len(), config.draw_count());
    assert!(diffs.iter().all(|d| d.len() == 3));
}

#[test]
fn separated_pair_needs_both_periods() {
    let data = duplicated_periods().group(1).unwrap();
    assert!(run_separated_pair(&data, &SamplerConfig::default()).is_err());
}

#[test]
fn thinning_and_support_over_a_full_run() {
    let data = duplicated_periods();
    let config = SamplerConfig {
        thin: 7,
        ..SamplerConfig::with_protocol(3000, 1000, 2)
    };
    let chain = run_chain(&data, ModelKind::Joint, &config).unwrap();
    assert_eq!(chain.len(), 2000 / 7);
    assert!(chain.draws.iter().all(|d| model::check_support(d, &data)));
    assert_eq!(chain.adapted_steps, chain.final_steps);
    assert!((0.0..=1.0).contains(&chain.acceptance.weights_prior));
    for rate in [chain.acceptance.joint_walk, chain.acceptance.latents] {
        assert!((0.05..0.95).contains(&rate), "acceptance {rate}");
    }
}
