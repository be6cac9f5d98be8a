//! Return-count accumulation and the final aggregation into an upper
//! confidence bound on the second eigenvalue.

use crate::error::{Error, Result};
use crate::kl::cb_unchecked;

/// Run parameters: `|Ω|`, the number of sample paths `I`, the maximal path
/// length `K` and the confidence parameter `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcpiConfig {
    pub state_space_size: usize,
    pub num_paths: u64,
    pub max_path_length: usize,
    pub confidence: f64,
}

impl UcpiConfig {
    pub fn new(
        state_space_size: usize,
        num_paths: u64,
        max_path_length: usize,
        confidence: f64,
    ) -> Result<Self> {
        let cfg = Self {
            state_space_size,
            num_paths,
            max_path_length,
            confidence,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config for a budget of `n` oracle calls using [`default_parameters`].
    pub fn from_budget(state_space_size: usize, n: u64) -> Result<Self> {
        let p = default_parameters(n)?;
        Self::new(state_space_size, p.num_paths, p.max_path_length, p.confidence)
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_space_size < 2 {
            return Err(Error::Config(format!(
                "state space size must be at least 2, got {}",
                self.state_space_size
            )));
        }
        if self.num_paths == 0 {
            return Err(Error::Config("number of paths I must be at least 1".into()));
        }
        if self.max_path_length == 0 {
            return Err(Error::Config("maximal path length K must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Domain {
                name: "confidence",
                value: self.confidence,
                domain: "(0, 1)",
            });
        }
        Ok(())
    }

    /// Same configuration with `I` replaced, used when a run stops early.
    pub fn with_num_paths(mut self, num_paths: u64) -> Self {
        self.num_paths = num_paths;
        self
    }

    /// Total number of transitions simulated under this configuration.
    pub fn oracle_calls(&self) -> u64 {
        self.num_paths * self.max_path_length as u64
    }

    /// Whether `2 ln(2K/δ) / I ≤ 1/|Ω|`, the regime in which the coverage and
    /// error guarantees hold. Configs outside it still run.
    pub fn is_guaranteed(&self) -> bool {
        validity_check(self)
    }
}

pub fn validity_check(cfg: &UcpiConfig) -> bool {
    let k = cfg.max_path_length as f64;
    let lhs = 2.0 * (2.0 * k / cfg.confidence).ln() / cfg.num_paths as f64;
    lhs <= 1.0 / cfg.state_space_size as f64
}

/// Per-`k` counts of paths that sit at their starting state after `k` steps.
///
/// Integer counts merge exactly, so any split of the paths across workers
/// finalizes to the same estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReturnCountAccumulator {
    counts: Vec<u64>,
    paths_completed: u64,
}

impl ReturnCountAccumulator {
    pub fn new(max_path_length: usize) -> Self {
        Self {
            counts: vec![0; max_path_length],
            paths_completed: 0,
        }
    }

    /// Builds an accumulator from raw counts, checking `counts[k] ≤ paths`.
    pub fn from_counts(counts: Vec<u64>, paths_completed: u64) -> Result<Self> {
        if let Some(&c) = counts.iter().find(|&&c| c > paths_completed) {
            return Err(Error::Config(format!(
                "return count {c} exceeds the {paths_completed} completed paths"
            )));
        }
        Ok(Self {
            counts,
            paths_completed,
        })
    }

    pub fn max_path_length(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn paths_completed(&self) -> u64 {
        self.paths_completed
    }

    /// Records one completed path given the (1-based) steps at which it was
    /// back at its starting state.
    pub fn record_path<I>(&mut self, return_steps: I)
    where
        I: IntoIterator<Item = usize>,
    {
        for k in return_steps {
            self.counts[k - 1] += 1;
        }
        self.paths_completed += 1;
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.counts.len() != other.counts.len() {
            return Err(Error::LengthMismatch {
                expected: self.counts.len(),
                actual: other.counts.len(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.paths_completed += other.paths_completed;
        Ok(())
    }
}

/// Componentwise sum of accumulators sharing the same `K`.
pub fn merge_accumulators<'a, I>(accumulators: I) -> Result<ReturnCountAccumulator>
where
    I: IntoIterator<Item = &'a ReturnCountAccumulator>,
{
    let mut iter = accumulators.into_iter();
    let mut total = match iter.next() {
        Some(first) => first.clone(),
        None => return Err(Error::Config("nothing to merge".into())),
    };
    for acc in iter {
        total.merge(acc)?;
    }
    Ok(total)
}

/// Output of a run: per-`k` empirical return frequency `m̂_k`, its
/// confidence upper bound `û_k`, the plug-in eigenvalue bound `ℓ̂_k`, and the
/// selected minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct UcpiEstimate {
    pub m_hat: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub ell_hat: Vec<f64>,
    pub ell_star: f64,
    /// 1-based path length achieving `ell_star` (smallest on ties).
    pub argmin_k: usize,
    pub relaxation_upper: f64,
    pub informative: bool,
}

impl UcpiEstimate {
    /// Builds the estimate from per-`k` upper bounds on the return
    /// probability (scaled by `trace_scale`, which is `|Ω|` for uniform starts).
    pub(crate) fn from_bounds(m_hat: Vec<f64>, u_hat: Vec<f64>, trace_scale: f64) -> Self {
        let ell_hat: Vec<f64> = u_hat
            .iter()
            .enumerate()
            .map(|(i, &u)| clamp_root(trace_scale * u - 1.0, i + 1))
            .collect();
        let (argmin, ell_star) =
            ell_hat
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |best, (i, v)| if v < best.1 { (i, v) } else { best },
                );
        Self {
            m_hat,
            u_hat,
            ell_hat,
            ell_star,
            argmin_k: argmin + 1,
            relaxation_upper: relaxation_upper_bound(ell_star),
            informative: ell_star < 1.0,
        }
    }
}

#[inline]
fn clamp_root(base: f64, k: usize) -> f64 {
    let base = base.max(0.0);
    if base >= 1.0 {
        1.0
    } else {
        base.powf(1.0 / k as f64).min(1.0)
    }
}

/// `min((max{|Ω| u - 1, 0})^{1/k}, 1)`.
pub fn plugin_bound(u: f64, k: usize, state_space_size: usize) -> Result<f64> {
    crate::error::check_unit("u", u)?;
    if k == 0 {
        return Err(Error::Config("path length k must be at least 1".into()));
    }
    Ok(clamp_root(state_space_size as f64 * u - 1.0, k))
}

pub fn finalize_estimate(acc: &ReturnCountAccumulator, cfg: &UcpiConfig) -> Result<UcpiEstimate> {
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
    let m_hat: Vec<f64> = acc.counts().iter().map(|&c| c as f64 / trials).collect();
    let u_hat = m_hat
        .iter()
        .map(|&m| cb_unchecked(m, cfg.num_paths, per_k))
        .collect();
    Ok(UcpiEstimate::from_bounds(
        m_hat,
        u_hat,
        cfg.state_space_size as f64,
    ))
}

/// `1/(1 - ℓ)`, or `+∞` when `ℓ = 1`.
pub fn relaxation_upper_bound(ell_star: f64) -> f64 {
    if ell_star >= 1.0 {
        f64::INFINITY
    } else {
        1.0 / (1.0 - ell_star)
    }
}

/// Parameters for a budget of `n` transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultParameters {
    pub num_paths: u64,
    pub max_path_length: usize,
    pub confidence: f64,
}

/// `δ = n^{-1/2}`, `K = ⌈(ln n)²⌉`, `I = ⌊n/K⌋`.
pub fn default_parameters(n: u64) -> Result<DefaultParameters> {
    let ln_n = (n as f64).ln();
    let max_path_length = (ln_n * ln_n).ceil() as usize;
    if max_path_length == 0 {
        return Err(Error::Config(format!("budget n = {n} is too small")));
    }
    let num_paths = n / max_path_length as u64;
    if num_paths == 0 {
        return Err(Error::Config(format!(
            "budget n = {n} leaves no complete path of length {max_path_length}"
        )));
    }
    Ok(DefaultParameters {
        num_paths,
        max_path_length,
        confidence: 1.0 / (n as f64).sqrt(),
    })
}
