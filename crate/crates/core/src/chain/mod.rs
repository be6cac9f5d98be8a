//! Black-box chain access and the concrete chains used for experiments.
//!
//! The estimator only ever sees a [`TransitionOracle`] and an
//! [`InitialSampler`]. The concrete chains here additionally implement
//! [`EnumerableChain`] so that their exact spectrum can be computed for
//! comparison.

mod dense;
mod exact;
mod line;
mod regular;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, RngCore};

use crate::error::{Error, OracleError, Result};

pub use dense::DenseMatrixChain;
pub use exact::{
    check_reversible, empirical_transition_matrix, exact_spectrum, solve_stationary, trace_of_power,
    trace_of_powers, EmpiricalTransitions, EnumerableChain, Spectrum, MAX_EXACT_STATES,
};
pub use line::{line_stationary, BiasedLineChain};
pub use regular::{generate_regular_graph, RegularGraphChain};

/// One-step simulator of a Markov chain on states `0..state_space_size()`.
///
/// Implementations hold no path history; all randomness comes from the
/// caller's stream, so one oracle can serve any number of threads.
pub trait TransitionOracle: Send + Sync {
    fn state_space_size(&self) -> usize;

    fn next_state(&self, state: usize, rng: &mut dyn RngCore) -> Result<usize, OracleError>;
}

impl<T: TransitionOracle + ?Sized> TransitionOracle for &T {
    fn state_space_size(&self) -> usize {
        (**self).state_space_size()
    }

    fn next_state(&self, state: usize, rng: &mut dyn RngCore) -> Result<usize, OracleError> {
        (**self).next_state(state, rng)
    }
}

impl<T: TransitionOracle + ?Sized> TransitionOracle for Box<T> {
    fn state_space_size(&self) -> usize {
        (**self).state_space_size()
    }

    fn next_state(&self, state: usize, rng: &mut dyn RngCore) -> Result<usize, OracleError> {
        (**self).next_state(state, rng)
    }
}

/// Distribution of the starting state of each sample path.
pub trait InitialSampler: Send + Sync {
    fn state_space_size(&self) -> usize;

    fn sample(&self, rng: &mut dyn RngCore) -> usize;

    fn pmf(&self, state: usize) -> f64;

    fn min_pmf(&self) -> f64;

    /// `1 / min_pmf`, the largest importance weight.
    fn max_weight(&self) -> f64 {
        1.0 / self.min_pmf()
    }
}

impl<T: InitialSampler + ?Sized> InitialSampler for &T {
    fn state_space_size(&self) -> usize {
        (**self).state_space_size()
    }
    fn sample(&self, rng: &mut dyn RngCore) -> usize {
        (**self).sample(rng)
    }
    fn pmf(&self, state: usize) -> f64 {
        (**self).pmf(state)
    }
    fn min_pmf(&self) -> f64 {
        (**self).min_pmf()
    }
    fn max_weight(&self) -> f64 {
        (**self).max_weight()
    }
}

impl<T: InitialSampler + ?Sized> InitialSampler for Box<T> {
    fn state_space_size(&self) -> usize {
        (**self).state_space_size()
    }
    fn sample(&self, rng: &mut dyn RngCore) -> usize {
        (**self).sample(rng)
    }
    fn pmf(&self, state: usize) -> f64 {
        (**self).pmf(state)
    }
    fn min_pmf(&self) -> f64 {
        (**self).min_pmf()
    }
    fn max_weight(&self) -> f64 {
        (**self).max_weight()
    }
}

/// Uniform start on `0..size`. Holds no per-state data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformSampler {
    size: usize,
}

impl UniformSampler {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Sampler("empty state space".into()));
        }
        Ok(Self { size })
    }
}

impl InitialSampler for UniformSampler {
    fn state_space_size(&self) -> usize {
        self.size
    }

    fn sample(&self, rng: &mut dyn RngCore) -> usize {
        rng.random_range(0..self.size)
    }

    fn pmf(&self, state: usize) -> f64 {
        if state < self.size {
            1.0 / self.size as f64
        } else {
            0.0
        }
    }

    fn min_pmf(&self) -> f64 {
        1.0 / self.size as f64
    }

    fn max_weight(&self) -> f64 {
        self.size as f64
    }
}

/// Start distribution given by an explicit probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSampler {
    pmf: Vec<f64>,
    cumulative: Vec<f64>,
    min_pmf: f64,
}

impl DiscreteSampler {
    /// Accepts a strictly positive vector summing to 1 within `1e-9` and
    /// renormalizes it.
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::Sampler("empty probability vector".into()));
        }
        if let Some((i, &p)) = pmf.iter().enumerate().find(|(_, &p)| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Sampler(format!("pmf({i}) = {p} is not positive")));
        }
        let sum: f64 = pmf.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Sampler(format!("probabilities sum to {sum}, not 1")));
        }
        let pmf: Vec<f64> = pmf.iter().map(|p| p / sum).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        let min_pmf = pmf.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            pmf,
            cumulative,
            min_pmf,
        })
    }

    /// Parses newline-separated decimal probabilities.
    pub fn from_reader<R: std::io::BufRead>(reader: R) -> Result<Self> {
        let mut pmf = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            pmf.push(t.parse::<f64>().map_err(|e| Error::Parse {
                line: i + 1,
                message: format!("{t:?}: {e}"),
            })?);
        }
        Self::new(pmf)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.pmf
    }
}

impl InitialSampler for DiscreteSampler {
    fn state_space_size(&self) -> usize {
        self.pmf.len()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.pmf.len() - 1)
    }

    fn pmf(&self, state: usize) -> f64 {
        self.pmf.get(state).copied().unwrap_or(0.0)
    }

    fn min_pmf(&self) -> f64 {
        self.min_pmf
    }
}

/// Wraps an oracle and counts `next_state` calls.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: TransitionOracle> TransitionOracle for CountingOracle<O> {
    fn state_space_size(&self) -> usize {
        self.inner.state_space_size()
    }

    fn next_state(&self, state: usize, rng: &mut dyn RngCore) -> Result<usize, OracleError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.next_state(state, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;

    #[test]
    fn uniform_sampler_basics() {
        let s = UniformSampler::new(7).unwrap();
        assert_eq!(s.max_weight(), 7.0);
        assert_eq!(s.pmf(9), 0.0);
        let mut rng = path_rng(1, 0);
        assert!((0..1000).all(|_| s.sample(&mut rng) < 7));
        assert!(UniformSampler::new(0).is_err());
    }

    #[test]
    fn discrete_sampler_frequencies() {
        let s = DiscreteSampler::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(s.min_pmf(), 0.2);
        assert!((s.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut rng = path_rng(2, 0);
        let mut hits = [0u32; 3];
        for _ in 0..100_000 {
            hits[s.sample(&mut rng)] += 1;
        }
        for (h, p) in hits.iter().zip([0.2, 0.5, 0.3]) {
            let f = *h as f64 / 1e5;
            assert!((f - p).abs() < 5.0 * (p * (1.0 - p) / 1e5f64).sqrt());
        }
    }

    #[test]
    fn discrete_sampler_rejects_bad_pmf() {
        assert!(DiscreteSampler::new(vec![0.5, 0.6]).is_err());
        assert!(DiscreteSampler::new(vec![1.0, 0.0]).is_err());
        assert!(DiscreteSampler::new(vec![]).is_err());
        let parsed = DiscreteSampler::from_reader("0.25\n0.75\n\n".as_bytes()).unwrap();
        assert_eq!(parsed.probabilities(), &[0.25, 0.75]);
        assert!(DiscreteSampler::from_reader("0.25\nabc\n".as_bytes()).is_err());
    }
}
