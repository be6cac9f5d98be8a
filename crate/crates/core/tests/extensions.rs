use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use ucpi::chain::*;
use ucpi::extensions::*;
use ucpi::rng::path_rng;
use ucpi::sampling::RtfEngine;
use ucpi::{default_parameters, finalize_estimate, UcpiConfig};

fn flip_chain() -> DenseMatrixChain {
    DenseMatrixChain::from_rows(vec![vec![0.1, 0.9], vec![0.9, 0.1]]).unwrap()
}

fn two_state() -> DenseMatrixChain {
    DenseMatrixChain::from_rows(vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap()
}

fn violation_slack(delta: f64, trials: usize) -> f64 {
    delta + 3.0 * (delta / trials as f64).sqrt()
}

#[test]
fn squared_oracle_matches_matrix_square() {
    let chain = DenseMatrixChain::from_rows(vec![
        vec![0.0, 0.7, 0.3],
        vec![0.5, 0.1, 0.4],
        vec![0.2, 0.6, 0.2],
    ])
    .unwrap();
    let p2 = chain.matrix() * chain.matrix();
    let squared = SquaredChainOracle::new(&chain);
    let critical = ChiSquared::new(2.0).unwrap().inverse_cdf(1.0 - 1e-3);
    let draws = 20_000;
    for x in 0..3 {
        let mut rng = path_rng(11, x as u64);
        let mut hits = [0u64; 3];
        for _ in 0..draws {
            hits[squared.next_state(x, &mut rng).unwrap()] += 1;
        }
        let stat: f64 = (0..3)
            .map(|y| {
                let e = p2[(x, y)] * draws as f64;
                (hits[y] as f64 - e).powi(2) / e
            })
            .sum();
        assert!(stat <= critical, "row {x}: {stat}");
    }
}

#[test]
fn squared_oracle_makes_two_calls() {
    let counting = CountingOracle::new(flip_chain());
    let squared = SquaredChainOracle::new(&counting);
    let mut rng = path_rng(0, 0);
    for _ in 0..7 {
        squared.next_state(0, &mut rng).unwrap();
    }
    assert_eq!(counting.calls(), 14);
}

#[test]
fn nonlazy_mapping_is_a_square_root() {
    let chain = flip_chain();
    let start = UniformSampler::new(2).unwrap();
    let d = default_parameters(5_000).unwrap();
    let cfg = UcpiConfig::new(2, d.num_paths, d.max_path_length, d.confidence).unwrap();
    let est = estimate_nonlazy(&chain, &start, &cfg, 3, 2).unwrap();
    assert_eq!(est.lambda_star_upper, est.squared.ell_star.sqrt());
    assert!(est.lambda_star_upper >= est.squared.ell_star);
}

fn nonlazy_coverage(chain: &DenseMatrixChain, lambda_star: f64) {
    let n = 10_000u64;
    let d = default_parameters(n / 2).unwrap();
    let cfg = UcpiConfig::new(2, d.num_paths, d.max_path_length, d.confidence).unwrap();
    assert!(2 * cfg.oracle_calls() <= n);
    let start = UniformSampler::new(2).unwrap();
    let trials = 200;
    let violations = (0..trials)
        .filter(|&t| {
            let est = estimate_nonlazy(chain, &start, &cfg, 1000 + t as u64, 1).unwrap();
            est.lambda_star_upper < lambda_star
        })
        .count();
    let freq = violations as f64 / trials as f64;
    assert!(freq <= violation_slack(cfg.confidence, trials), "{freq}");
}

#[test]
fn nonlazy_coverage_on_negative_spectrum() {
    let chain = flip_chain();
    let spectrum = exact_spectrum(&chain).unwrap();
    assert!((spectrum.lambda_star() - 0.8).abs() < 1e-12);
    nonlazy_coverage(&chain, 0.8);
}

#[test]
fn nonlazy_coverage_on_lazy_chain() {
    nonlazy_coverage(&two_state(), 0.5);
}

#[test]
fn uniform_weights_reduce_to_plain_counts() {
    let chain = BiasedLineChain::new(20, 0.9).unwrap();
    let uniform = UniformSampler::new(20).unwrap();
    let cfg = UcpiConfig::from_budget(20, 200_000).unwrap();
    for workers in [1, 3] {
        let weighted = weighted_collect(&chain, &uniform, &cfg, 17, workers).unwrap();
        let plain = RtfEngine::new(&chain, &uniform, cfg).seed(17).collect().unwrap();
        let scaled = weighted.scaled_counts();
        for (s, &c) in scaled.iter().zip(plain.counts()) {
            assert_eq!(*s, c as f64);
        }
        for (w, &c) in weighted.weighted_sums().iter().zip(plain.counts()) {
            assert_eq!(*w, 20.0 * c as f64);
        }
        assert_eq!(
            finalize_weighted(&weighted, &cfg).unwrap(),
            finalize_estimate(&plain, &cfg).unwrap()
        );
    }
}

#[test]
fn absorbing_chain_weights_every_return() {
    // configs need two states, so the point-mass case is checked on an
    // absorbing chain where every path returns at every step
    let chain = DenseMatrixChain::new(DMatrix::identity(2, 2)).unwrap();
    let mu = DiscreteSampler::new(vec![0.25, 0.75]).unwrap();
    let cfg = UcpiConfig::new(2, 40, 6, 0.1).unwrap();
    let acc = weighted_collect(&chain, &mu, &cfg, 0, 1).unwrap();
    let first = acc.weighted_sums()[0];
    assert!(acc.weighted_sums().iter().all(|&w| w == first));
    // each path contributes 1/μ(x0), either 4 or 4/3
    assert!((40.0 * 4.0 / 3.0 - 1e-9..=160.0 + 1e-9).contains(&first));
    assert!(acc.scaled_counts().iter().all(|&s| s <= 40.0));
}

#[test]
fn weighted_sums_are_unbiased_for_the_trace() {
    let chain = two_state();
    let mu = DiscreteSampler::new(vec![0.4, 0.6]).unwrap();
    let trials = 100_000u64;
    let cfg = UcpiConfig::new(2, trials, 12, 0.01).unwrap();
    let acc = weighted_collect(&chain, &mu, &cfg, 5, 2).unwrap();
    let w_max = acc.max_weight();
    assert!((w_max - 2.5).abs() < 1e-12);
    let traces = trace_of_powers(&chain, 12).unwrap();
    for (k, (&sum, &trace)) in acc.weighted_sums().iter().zip(&traces).enumerate() {
        assert!((trace - (1.0 + 0.5f64.powi(k as i32 + 1))).abs() < 1e-12);
        // terms lie in [0, w_max], so their variance is at most mean·(w_max − mean)
        let se = (trace * (w_max - trace) / trials as f64).sqrt();
        let mean = sum / trials as f64;
        assert!((mean - trace).abs() <= 5.0 * se, "k={}: {mean} vs {trace}", k + 1);
    }
}

#[test]
fn zero_scaled_mean_uses_closed_form() {
    // never returns after one step
    let chain = DenseMatrixChain::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let mu = DiscreteSampler::new(vec![0.3, 0.7]).unwrap();
    let cfg = UcpiConfig::new(2, 500, 1, 0.2).unwrap();
    let acc = weighted_collect(&chain, &mu, &cfg, 9, 1).unwrap();
    let est = finalize_weighted(&acc, &cfg).unwrap();
    let u = 1.0 - (0.2f64 / 2.0).powf(1.0 / 500.0);
    assert!((est.u_hat[0] - u).abs() < 1e-15);
    let t = u / 0.3;
    assert!((est.ell_hat[0] - (t - 1.0).clamp(0.0, 1.0)).abs() < 1e-12);
}

#[test]
fn weighted_coverage_on_two_state() {
    let chain = two_state();
    let mu = DiscreteSampler::new(vec![0.4, 0.6]).unwrap();
    let cfg = UcpiConfig::from_budget(2, 10_000).unwrap();
    let trials = 200;
    let violations = (0..trials)
        .filter(|&t| {
            let acc = weighted_collect(&chain, &mu, &cfg, 500 + t as u64, 1).unwrap();
            finalize_weighted(&acc, &cfg).unwrap().ell_star < 0.5
        })
        .count();
    let freq = violations as f64 / trials as f64;
    assert!(freq <= violation_slack(cfg.confidence, trials), "{freq}");
}

#[test]
fn weighted_runs_are_worker_independent() {
    let chain = BiasedLineChain::new(15, 0.7).unwrap();
    let pmf: Vec<f64> = (1..=15).map(|i| i as f64).collect();
    let total: f64 = pmf.iter().sum();
    let mu = DiscreteSampler::new(pmf.into_iter().map(|p| p / total).collect()).unwrap();
    let cfg = UcpiConfig::from_budget(15, 300_000).unwrap();
    let a = weighted_collect(&chain, &mu, &cfg, 4, 1).unwrap();
    for workers in [4, 16] {
        let b = weighted_collect(&chain, &mu, &cfg, 4, workers).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            finalize_weighted(&a, &cfg).unwrap(),
            finalize_weighted(&b, &cfg).unwrap()
        );
    }
}
