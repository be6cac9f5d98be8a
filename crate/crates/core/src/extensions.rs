//! Chains that are not lazy, and starts that are not uniform.
//!
//! A reversible chain that is not lazy may have negative eigenvalues, but
//! `P²` has the non-negative spectrum `λ_i²`, so an upper bound on the
//! second eigenvalue of `P²` maps to an upper bound on `λ⋆ = max_{i≥2} |λ_i|`
//! by a square root.
//!
//! With a start distribution `μ` the trace is recovered by importance
//! weighting, `tr(P^k) = E[1{X_k = X_0} / μ(X_0)]` for `X_0 ~ μ`. Each term is
//! rescaled by `w_max = 1/min μ` into `[0, 1]` so the Bernoulli-KL bound applies.

use std::ops::Range;

use rand::RngCore;

use crate::chain::{InitialSampler, TransitionOracle};
use crate::error::{Error, OracleError, Result};
use crate::estimator::{relaxation_upper_bound, UcpiConfig, UcpiEstimate};
use crate::kl::cb_unchecked;
use crate::rng::path_rng;
use crate::sampling::{run_partitioned, Interrupted, RtfEngine};

/// Simulates `P²` by taking two inner steps per call.
#[derive(Debug, Clone)]
pub struct SquaredChainOracle<O> {
    inner: O,
}

impl<O> SquaredChainOracle<O> {
    pub fn new(inner: O) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: TransitionOracle> TransitionOracle for SquaredChainOracle<O> {
    fn state_space_size(&self) -> usize {
        self.inner.state_space_size()
    }

    fn next_state(&self, state: usize, rng: &mut dyn RngCore) -> Result<usize, OracleError> {
        let mid = self.inner.next_state(state, rng)?;
        self.inner.next_state(mid, rng)
    }
}

/// Result of running the estimator on `P²`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonLazyEstimate {
    /// The estimate for the squared chain; `ell_star` bounds `λ⋆²`.
    pub squared: UcpiEstimate,
    /// `√ℓ̂⋆(P²)`, an upper bound on `λ⋆` of the original chain.
    pub lambda_star_upper: f64,
    pub relaxation_upper: f64,
}

impl NonLazyEstimate {
    pub fn from_squared(squared: UcpiEstimate) -> Self {
        let lambda_star_upper = squared.ell_star.sqrt();
        Self {
            relaxation_upper: relaxation_upper_bound(lambda_star_upper),
            lambda_star_upper,
            squared,
        }
    }
}

/// Runs the estimator on `P²`. `cfg` counts squared steps, so the run makes
/// `2·I·K` calls to `oracle`.
pub fn estimate_nonlazy<O, S>(
    oracle: &O,
    initial: &S,
    cfg: &UcpiConfig,
    master_seed: u64,
    worker_count: usize,
) -> Result<NonLazyEstimate>
where
    O: TransitionOracle,
    S: InitialSampler + ?Sized,
{
    let squared = SquaredChainOracle::new(oracle);
    let est = RtfEngine::new(&squared, initial, *cfg)
        .seed(master_seed)
        .workers(worker_count)
        .estimate()?;
    Ok(NonLazyEstimate::from_squared(est))
}

/// Fixed-point scale for the rescaled weights. Terms `≥ 2^-27` are exact and
/// sums stay exact (hence independent of summation order) up to `2^47` paths.
const FIXED_SCALE: f64 = (1u128 << 80) as f64;

/// Importance-weighted return sums.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedReturnAccumulator {
    /// `Σ_j 1{X_k = X_0} · min_pmf / μ(X_0)`, in units of `2^-80`.
    scaled_fixed: Vec<i128>,
    paths_completed: u64,
    max_weight_bits: u64,
}

impl WeightedReturnAccumulator {
    pub fn new(max_path_length: usize, max_weight: f64) -> Self {
        Self {
            scaled_fixed: vec![0; max_path_length],
            paths_completed: 0,
            max_weight_bits: max_weight.to_bits(),
        }
    }

    pub fn max_path_length(&self) -> usize {
        self.scaled_fixed.len()
    }

    pub fn paths_completed(&self) -> u64 {
        self.paths_completed
    }

    /// `w_max = 1 / min_pmf`.
    pub fn max_weight(&self) -> f64 {
        f64::from_bits(self.max_weight_bits)
    }

    /// Per-`k` sums of weights rescaled into `[0, 1]`; each is at most
    /// `paths_completed`.
    pub fn scaled_counts(&self) -> Vec<f64> {
        self.scaled_fixed
            .iter()
            .map(|&s| s as f64 / FIXED_SCALE)
            .collect()
    }

    /// `Σ_j 1{X_k = X_0} / μ(X_0)`.
    pub fn weighted_sums(&self) -> Vec<f64> {
        let w = self.max_weight();
        self.scaled_counts().into_iter().map(|s| s * w).collect()
    }

    fn record_path(&mut self, return_steps: impl IntoIterator<Item = usize>, scaled_term: i128) {
        for k in return_steps {
            self.scaled_fixed[k - 1] += scaled_term;
        }
        self.paths_completed += 1;
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.scaled_fixed.len() != other.scaled_fixed.len() {
            return Err(Error::LengthMismatch {
                expected: self.scaled_fixed.len(),
                actual: other.scaled_fixed.len(),
            });
        }
        if self.max_weight_bits != other.max_weight_bits {
            return Err(Error::Config("accumulators use different weight scales".into()));
        }
        for (a, b) in self.scaled_fixed.iter_mut().zip(&other.scaled_fixed) {
            *a += b;
        }
        self.paths_completed += other.paths_completed;
        Ok(())
    }
}

fn weighted_range<O, S>(
    oracle: &O,
    initial: &S,
    cfg: &UcpiConfig,
    master_seed: u64,
    paths: Range<u64>,
) -> (WeightedReturnAccumulator, Option<Error>)
where
    O: TransitionOracle + ?Sized,
    S: InitialSampler + ?Sized,
{
    let k_max = cfg.max_path_length;
    let n = cfg.state_space_size;
    let min_pmf = initial.min_pmf();
    let mut acc = WeightedReturnAccumulator::new(k_max, initial.max_weight());
    let mut returns = Vec::with_capacity(k_max);
    for j in paths {
        let mut rng = path_rng(master_seed, j);
        let start = initial.sample(&mut rng);
        let p = initial.pmf(start);
        if p.is_nan() || p <= 0.0 {
            return (
                acc,
                Some(Error::Sampler(format!("sampled state {start} has pmf {p}"))),
            );
        }
        let term = ((min_pmf / p).min(1.0) * FIXED_SCALE).round() as i128;
        let mut x = start;
        returns.clear();
        for k in 1..=k_max {
            x = match oracle.next_state(x, &mut rng) {
                Ok(y) if y < n => y,
                Ok(y) => {
                    return (
                        acc,
                        Some(OracleError(format!("returned state {y} >= {n}")).into()),
                    )
                }
                Err(e) => return (acc, Some(e.into())),
            };
            if x == start {
                returns.push(k);
            }
        }
        acc.record_path(returns.drain(..), term);
    }
    (acc, None)
}

/// Collects `I` paths started from `initial` and records importance-weighted
/// returns. Uses the same per-path streams as the uniform-start engine.
pub fn weighted_collect<O, S>(
    oracle: &O,
    initial: &S,
    cfg: &UcpiConfig,
    master_seed: u64,
    worker_count: usize,
) -> Result<WeightedReturnAccumulator, Interrupted<WeightedReturnAccumulator>>
where
    O: TransitionOracle + ?Sized,
    S: InitialSampler + ?Sized,
{
    let empty = || WeightedReturnAccumulator::new(cfg.max_path_length, initial.max_weight());
    let check = cfg.validate().and_then(|_| {
        if oracle.state_space_size() != cfg.state_space_size
            || initial.state_space_size() != cfg.state_space_size
        {
            Err(Error::Config("state space sizes disagree".into()))
        } else if initial.min_pmf().is_nan() || initial.min_pmf() <= 0.0 {
            Err(Error::Sampler("minimum probability must be positive".into()))
        } else {
            Ok(())
        }
    });
    if let Err(cause) = check {
        return Err(Interrupted {
            partial: empty(),
            cause,
        });
    }
    let parts = run_partitioned(cfg.num_paths, worker_count, |r| {
        weighted_range(oracle, initial, cfg, master_seed, r)
    });
    let mut total = empty();
    let mut failure = None;
    for (acc, err) in parts {
        total.merge(&acc).expect("worker accumulators share K and scale");
        if failure.is_none() {
            failure = err;
        }
    }
    match failure {
        None => Ok(total),
        Some(cause) => Err(Interrupted {
            partial: total,
            cause,
        }),
    }
}

/// Finalizes importance-weighted sums. `m_hat` and `u_hat` of the result are
/// the rescaled mean and its upper bound; the trace bound is `u_hat · w_max`.
pub fn finalize_weighted(acc: &WeightedReturnAccumulator, cfg: &UcpiConfig) -> Result<UcpiEstimate> {
    cfg.validate()?;
    if acc.max_path_length() != cfg.max_path_length {
        return Err(Error::LengthMismatch {
            expected: cfg.max_path_length,
            actual: acc.max_path_length(),
        });
    }
    if acc.paths_completed() != cfg.num_paths {
        return Err(Error::PathCount {
            expected: cfg.num_paths,
            actual: acc.paths_completed(),
        });
    }
    let per_k = cfg.confidence / (2.0 * cfg.max_path_length as f64);
    let trials = cfg.num_paths as f64;
    let m_hat: Vec<f64> = acc
        .scaled_counts()
        .into_iter()
        .map(|s| (s / trials).clamp(0.0, 1.0))
        .collect();
    let u_hat = m_hat
        .iter()
        .map(|&m| cb_unchecked(m, cfg.num_paths, per_k))
        .collect();
    Ok(UcpiEstimate::from_bounds(m_hat, u_hat, acc.max_weight()))
}
