use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use rand::RngCore;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use ucpi::chain::*;
use ucpi::rng::path_rng;
use ucpi::sampling::*;
use ucpi::{finalize_estimate, merge_accumulators, OracleError, ReturnCountAccumulator, UcpiConfig};

fn two_state() -> DenseMatrixChain {
    DenseMatrixChain::from_rows(vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap()
}

/// Lazy walk on a cycle of ten states.
fn ten_state() -> DenseMatrixChain {
    let n = 10;
    DenseMatrixChain::new(DMatrix::from_fn(n, n, |x, y| {
        if x == y {
            0.5
        } else if (x + 1) % n == y || (y + 1) % n == x {
            0.25
        } else {
            0.0
        }
    }))
    .unwrap()
}

fn rtf(oracle: &dyn TransitionOracle, cfg: UcpiConfig, seed: u64, workers: usize) -> ReturnCountAccumulator {
    let start = UniformSampler::new(cfg.state_space_size).unwrap();
    RtfEngine::new(oracle, &start, cfg)
        .seed(seed)
        .workers(workers)
        .collect()
        .unwrap()
}

#[test]
fn absorbing_chain_always_returns() {
    let chain = DenseMatrixChain::new(DMatrix::identity(5, 5)).unwrap();
    let cfg = UcpiConfig::new(5, 300, 12, 0.1).unwrap();
    let acc = rtf(&chain, cfg, 1, 1);
    assert!(acc.counts().iter().all(|&c| c == 300));
    assert_eq!(acc.paths_completed(), 300);
}

#[test]
fn deterministic_two_cycle_returns_at_even_steps() {
    let chain = DenseMatrixChain::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let cfg = UcpiConfig::new(2, 250, 9, 0.1).unwrap();
    let acc = rtf(&chain, cfg, 2, 3);
    for (i, &c) in acc.counts().iter().enumerate() {
        let k = i + 1;
        assert_eq!(c, if k % 2 == 0 { 250 } else { 0 }, "k={k}");
    }
}

#[test]
fn first_step_return_frequency_on_two_state() {
    let cfg = UcpiConfig::new(2, 100_000, 10, 0.01).unwrap();
    let acc = rtf(&two_state(), cfg, 3, 2);
    let m1 = 0.75;
    let f = acc.counts()[0] as f64 / 1e5;
    assert!((f - m1).abs() <= 5.0 * (m1 * (1.0 - m1) / 1e5f64).sqrt(), "{f}");
}

#[test]
fn return_frequencies_match_trace() {
    let chain = BiasedLineChain::new(20, 0.7).unwrap();
    let spectrum = exact_spectrum(&chain).unwrap();
    let cfg = UcpiConfig::new(20, 100_000, 40, 0.01).unwrap();
    let acc = rtf(&chain, cfg, 4, 1);
    for k in 1..=40 {
        let m = spectrum.return_probability(k);
        let f = acc.counts()[k - 1] as f64 / 1e5;
        assert!(
            (f - m).abs() <= 5.0 * (m * (1.0 - m) / 1e5).sqrt(),
            "k={k}: {f} vs {m}"
        );
    }
}

#[test]
fn oracle_call_budget_is_exact() {
    let chain = CountingOracle::new(BiasedLineChain::new(20, 0.9).unwrap());
    let cfg = UcpiConfig::from_budget(20, 100_000).unwrap();
    for workers in [1, 4] {
        chain.reset();
        rtf(&chain, cfg, 5, workers);
        assert_eq!(chain.calls(), cfg.num_paths * cfg.max_path_length as u64);
        assert!(chain.calls() <= 100_000);
    }
}

#[test]
fn worker_count_does_not_change_the_estimate() {
    let chain = BiasedLineChain::new(20, 0.9).unwrap();
    let cfg = UcpiConfig::from_budget(20, 1_000_000).unwrap();
    assert_eq!(cfg.num_paths, 5235);
    let base = rtf(&chain, cfg, 6, 1);
    let est = finalize_estimate(&base, &cfg).unwrap();
    for workers in [4, 16] {
        let other = rtf(&chain, cfg, 6, workers);
        assert_eq!(base, other);
        let e = finalize_estimate(&other, &cfg).unwrap();
        assert_eq!(e, est);
        assert_eq!(e.ell_star.to_bits(), est.ell_star.to_bits());
    }
}

#[test]
fn merged_batches_equal_one_run() {
    // Seeds key paths by index, so a run over paths 0..a and one over a..I
    // (emulated by a split engine) merge to the full run.
    let chain = two_state();
    let cfg = UcpiConfig::new(2, 1000, 15, 0.05).unwrap();
    let full = rtf(&chain, cfg, 8, 1);
    let split = rtf(&chain, cfg, 8, 7);
    assert_eq!(merge_accumulators([&split]).unwrap(), full);
    assert_eq!(
        finalize_estimate(&full, &cfg).unwrap(),
        finalize_estimate(&split, &cfg).unwrap()
    );
}

/// Fails once it has served `limit` transitions.
struct FailingOracle {
    inner: BiasedLineChain,
    served: AtomicU64,
    limit: u64,
}

impl TransitionOracle for FailingOracle {
    fn state_space_size(&self) -> usize {
        self.inner.state_space_size()
    }
    fn next_state(&self, state: usize, rng: &mut dyn RngCore) -> Result<usize, OracleError> {
        if self.served.fetch_add(1, Ordering::SeqCst) >= self.limit {
            return Err(OracleError("simulator crashed".into()));
        }
        self.inner.next_state(state, rng)
    }
}

#[test]
fn oracle_failure_keeps_completed_paths() {
    let oracle = FailingOracle {
        inner: BiasedLineChain::new(10, 0.6).unwrap(),
        served: AtomicU64::new(0),
        limit: 105,
    };
    let start = UniformSampler::new(10).unwrap();
    let cfg = UcpiConfig::new(10, 50, 10, 0.1).unwrap();
    let err = RtfEngine::new(&oracle, &start, cfg)
        .seed(1)
        .collect()
        .unwrap_err();
    assert_eq!(err.partial.paths_completed(), 10);
    assert!(err.partial.counts().iter().all(|&c| c <= 10));
    assert!(err.to_string().contains("simulator crashed"));
    // the truncated sample still finalizes with I replaced
    let est = finalize_estimate(&err.partial, &cfg.with_num_paths(10)).unwrap();
    assert!(est.ell_star <= 1.0);
}

#[test]
fn mismatched_sizes_are_rejected() {
    let chain = two_state();
    let start = UniformSampler::new(3).unwrap();
    let cfg = UcpiConfig::new(2, 10, 5, 0.1).unwrap();
    assert!(RtfEngine::new(&chain, &start, cfg).collect().is_err());
}

#[test]
fn single_state_source_regenerates_immediately() {
    let k = 4;
    let engine = UspEngine::new(1, k, 0);
    let source = (0..=50).map(|_| Ok(0usize));
    let (acc, stats) = usp_collect(&engine, source, 100).unwrap();
    // 50 transitions, each segment takes one wait step plus k steps
    assert_eq!(stats.segments_emitted, 10);
    assert_eq!(acc.paths_completed(), 10);
    assert!(acc.counts().iter().all(|&c| c == 10));
    assert_eq!(stats.mean_wait, 1.0);
    assert_eq!(stats.max_wait, 1);
    assert!(stats.source_exhausted);
    assert_eq!(stats.source_steps_consumed, 50);
    assert!(stats.source_steps_consumed >= stats.segments_emitted * (k as u64 + 1) - k as u64);
}

#[test]
fn usp_stops_after_requested_segments() {
    let engine = UspEngine::new(1, 3, 0);
    let (acc, stats) = usp_collect(&engine, (0..1000).map(|_| Ok(0usize)), 5).unwrap();
    assert_eq!(acc.paths_completed(), 5);
    assert!(!stats.source_exhausted);
    assert_eq!(stats.source_steps_consumed, 20);
}

#[test]
fn usp_first_hit_after_start() {
    // The start element is never a regeneration point: with X_0 = 0 and every
    // later element 1, a target of 0 is never hit.
    let engine = UspEngine::new(2, 1, 3);
    let mut starts = Vec::new();
    let source = std::iter::once(Ok(0usize)).chain((0..200).map(|_| Ok(1usize)));
    let (_, stats) = engine.collect_observed(source, 1000, |s| starts.push(s)).unwrap();
    assert!(starts.iter().all(|&s| s == 1));
    assert!(stats.source_exhausted);
}

#[test]
fn usp_rejects_bad_states() {
    let engine = UspEngine::new(3, 2, 0);
    assert!(usp_collect(&engine, [Ok(0), Ok(1), Ok(7)], 10).is_err());
    let empty = usp_collect(&engine, std::iter::empty(), 10).unwrap();
    assert_eq!(empty.0.paths_completed(), 0);
    assert!(empty.1.source_exhausted);
}

#[test]
fn usp_segments_are_uniform_and_markov() {
    let chain = ten_state();
    let spectrum = exact_spectrum(&chain).unwrap();
    let k = 12;
    let engine = UspEngine::new(10, k, 21);
    let trajectory = OracleTrajectory::new(&chain, 0, u64::MAX, path_rng(22, 0));
    let mut hits = [0u64; 10];
    let (acc, stats) = engine
        .collect_observed(trajectory, 10_000, |s| hits[s] += 1)
        .unwrap();
    assert_eq!(stats.segments_emitted, 10_000);
    let e = 1000.0;
    let stat: f64 = hits.iter().map(|&h| (h as f64 - e).powi(2) / e).sum();
    let critical = ChiSquared::new(9.0).unwrap().inverse_cdf(1.0 - 1e-3);
    assert!(stat <= critical, "{stat}");
    for kk in 1..=k {
        let m = spectrum.return_probability(kk);
        let f = acc.counts()[kk - 1] as f64 / 1e4;
        assert!((f - m).abs() <= 5.0 * (m * (1.0 - m) / 1e4).sqrt(), "k={kk}");
    }
    assert!(stats.source_steps_consumed >= 10_000 * (k as u64 + 1) - k as u64);
}

#[test]
fn usp_efficiency_improves_with_budget() {
    let chain = ten_state();
    let mut ratios = Vec::new();
    for (i, n) in [10_000u64, 100_000, 1_000_000].into_iter().enumerate() {
        let cfg = UcpiConfig::from_budget(10, n).unwrap();
        let engine = UspEngine::new(10, cfg.max_path_length, 30 + i as u64);
        let trajectory = OracleTrajectory::new(&chain, 0, n, path_rng(40 + i as u64, 0));
        let (_, stats) = usp_collect(&engine, trajectory, u64::MAX).unwrap();
        assert!(stats.source_steps_consumed <= n);
        let per_segment = stats.source_steps_consumed as f64 / stats.segments_emitted as f64;
        assert!(
            (per_segment - (cfg.max_path_length as f64 + stats.mean_wait)).abs()
                < 1.0 + cfg.max_path_length as f64 * 0.05
        );
        ratios.push(stats.segments_emitted as f64 / cfg.num_paths as f64);
    }
    assert!(ratios.windows(2).all(|w| w[0] < w[1]), "{ratios:?}");
    assert!(ratios.iter().all(|&r| r < 1.0));
}

#[test]
fn usp_streams_from_file() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    for _ in 0..30 {
        writeln!(f, "0").unwrap();
    }
    writeln!(f).unwrap();
    f.flush().unwrap();
    let reader = std::io::BufReader::new(std::fs::File::open(f.path()).unwrap());
    let engine = UspEngine::new(1, 2, 0);
    let (acc, stats) = usp_collect(&engine, states_from_reader(reader), 100).unwrap();
    assert_eq!(acc.paths_completed(), 9);
    assert_eq!(stats.source_steps_consumed, 29);

    let bad = states_from_reader("0\n1\nx\n".as_bytes()).collect::<Vec<_>>();
    assert!(bad[2].is_err());
}
