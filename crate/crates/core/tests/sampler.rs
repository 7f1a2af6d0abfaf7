use hfdp::io::{generate, Design, GeneratorSpec};
use hfdp::metrics::adjusted_rand_index;
use hfdp::model::sample_prior_state;
use hfdp::sampler::zstep::{cost_matrix, mode_labels};
use hfdp::sampler::{
    alpha0_log_density, default_niw_priors, mode_z, run_gibbs_with, run_mcem, update_alpha0, AlphaProposal, GibbsOptions,
    Likelihood,
};
use hfdp::transport::{brute_force_ot, TransportProblem};
use hfdp::{ChainControls, Dataset, HfdpConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn alpha0_chain_matches_quadrature_of_its_conditional() {
    let (g, b) = (2.0, 1.0);
    let beta = [0.3, 0.7];
    let w = vec![vec![0.25, 0.75], vec![0.35, 0.65]];
    let log_p = |a: f64| alpha0_log_density(a, &beta, &w, g, b);

    // grid of 10^4 points covering the bulk of the conditional
    let (lo, hi, n) = (1e-4, 60.0, 10_000);
    let h = (hi - lo) / (n - 1) as f64;
    let peak = (0..n).map(|i| log_p(lo + i as f64 * h)).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1) = (0.0, 0.0);
    for i in 0..n {
        let a = lo + i as f64 * h;
        let p = (log_p(a) - peak).exp();
        z += p;
        m1 += p * a;
    }
    let exact = m1 / z;

    let mut r = rng(1);
    let mut prop = AlphaProposal::new(0.5);
    let mut a = 1.0;
    for _ in 0..5_000 {
        let (next, acc) = update_alpha0(a, &beta, &w, g, b, prop.scale(), &mut r).unwrap();
        prop.adapt(acc);
        a = next;
    }
    let steps = 100_000;
    let mut sum = 0.0;
    for _ in 0..steps {
        a = update_alpha0(a, &beta, &w, g, b, prop.scale(), &mut r).unwrap().0;
        sum += a;
    }
    let mean = sum / steps as f64;
    assert!((mean / exact - 1.0).abs() < 0.02, "chain {mean} quadrature {exact}");
}

fn small_dataset() -> Dataset {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i % 3) as f64]).collect();
    Dataset::from_rows(&rows, (0..10).map(|i| i % 2).collect(), 2).unwrap()
}

#[test]
fn prior_only_chain_moments_match_forward_simulation() {
    let ds = small_dataset();
    let (k, draws, thin) = (3, 20_000, 10);
    let config = HfdpConfig {
        k,
        g: 2.0,
        b: 1.0,
        epsilon: 1.0,
        niw: default_niw_priors(&ds).unwrap(),
        chain: ChainControls { iterations: 1_000 + draws * thin, burn_in: 1_000, thin, seed: 0, ..ChainControls::default() },
    };
    let options = GibbsOptions { likelihood: Likelihood::PriorOnly, check_invariants: true, ..Default::default() };
    let trace = run_gibbs_with(&ds, &config, &options, &mut rng(2)).unwrap();
    let mut r = rng(3);
    let forward: Vec<_> = (0..100_000).map(|_| sample_prior_state(&config, &ds.sizes(), &mut r).unwrap()).collect();
    let mean = |xs: &mut dyn Iterator<Item = f64>| {
        let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
        s / n as f64
    };
    let chain_alpha = mean(&mut trace.samples.iter().map(|s| s.state.alpha0));
    let fwd_alpha = mean(&mut forward.iter().map(|s| s.alpha0));
    assert!((chain_alpha / fwd_alpha - 1.0).abs() < 0.03, "{chain_alpha} vs {fwd_alpha}");
    for j in 0..k {
        let c = mean(&mut trace.samples.iter().map(|s| s.state.beta[j]));
        let f = mean(&mut forward.iter().map(|s| s.beta[j]));
        assert!((c / f - 1.0).abs() < 0.03, "beta {j}: {c} vs {f}");
    }
}

#[test]
fn mode_step_recovers_separated_partitions() {
    let mut exact = 0;
    for seed in 0..100 {
        let g = generate(&GeneratorSpec::new(Design::A1), &mut rng(seed)).unwrap();
        let ds = &g.dataset;
        let priors = default_niw_priors(ds).unwrap();
        let mut z_all = Vec::new();
        let mut truth_all = Vec::new();
        let truth_of = &g.truth;
        for a in 0..2 {
            // four rows of each true cluster
            let rows: Vec<usize> = (0..2).flat_map(|k| ds.index(a).iter().copied().filter(move |&i| truth_of[i] == k).take(4)).collect();
            let pts: Vec<&[f64]> = rows.iter().map(|&i| ds.point(i)).collect();
            let truth: Vec<usize> = rows.iter().map(|&i| g.truth[i]).collect();
            let cost = cost_matrix(&pts, &truth, 2, &priors[a]).unwrap();
            let z = mode_labels(&cost, &[4, 4]).unwrap();
            let problem = TransportProblem::new(8, 2, cost.clone(), vec![4, 4]).unwrap();
            assert_eq!(problem.total_cost(&z), brute_force_ot(&problem).unwrap().cost);
            z_all.extend(z.iter().map(|k| k + 2 * a));
            truth_all.extend(truth.iter().map(|k| k + 2 * a));
        }
        exact += usize::from(adjusted_rand_index(&z_all, &truth_all).unwrap() == 1.0);
    }
    assert!(exact >= 99, "{exact}/100");
}

fn a1_config(ds: &Dataset, seed: u64) -> HfdpConfig {
    HfdpConfig { k: 5, g: 1.0, b: 1e-7, epsilon: 0.05, niw: default_niw_priors(ds).unwrap(), chain: ChainControls::with_iterations(200, seed) }
}

#[test]
fn mode_is_a_fixed_point() {
    let g = generate(&GeneratorSpec::new(Design::A1), &mut rng(8)).unwrap();
    let config = a1_config(&g.dataset, 8);
    let result = run_mcem(&g.dataset, &config, &mut rng(8)).unwrap();
    let mut state = result.state.clone();
    mode_z(&mut state, &g.dataset, &config).unwrap();
    assert_eq!(state.z, result.state.z);
}

#[test]
fn log_marginal_trajectory_is_mostly_non_decreasing() {
    // monitored rather than asserted: stochastic occupancy updates can dip
    let mut monotone = 0;
    let seeds = 20;
    for seed in 0..seeds {
        let g = generate(&GeneratorSpec::new(Design::A1), &mut rng(seed)).unwrap();
        let config = a1_config(&g.dataset, seed);
        let result = run_mcem(&g.dataset, &config, &mut rng(seed)).unwrap();
        assert!(result.log_marginal.iter().all(|v| v.is_finite()));
        monotone += usize::from(result.log_marginal.windows(2).all(|w| w[1] >= w[0]));
    }
    eprintln!("non-decreasing log marginal in {monotone}/{seeds} runs");
}
