use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use super::exact::EnumerableChain;
use super::TransitionOracle;
use crate::error::{Error, OracleError, Result};

/// Lazy biased walk on `0..size`: stay with probability 1/2, step down with
/// probability `p/2`, up with `(1-p)/2`. A move that would leave the line
/// stays put instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasedLineChain {
    size: usize,
    bias: f64,
}

impl BiasedLineChain {
    pub fn new(size: usize, bias: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::Chain(format!("line needs at least 2 states, got {size}")));
        }
        if !(bias > 0.0 && bias < 1.0) {
            return Err(Error::Domain {
                name: "p",
                value: bias,
                domain: "(0, 1)",
            });
        }
        Ok(Self { size, bias })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }
}

impl TransitionOracle for BiasedLineChain {
    fn state_space_size(&self) -> usize {
        self.size
    }

    fn next_state(&self, state: usize, rng: &mut dyn RngCore) -> Result<usize, OracleError> {
        let u: f64 = rng.random();
        Ok(if u < 0.5 {
            state
        } else if u < 0.5 + 0.5 * self.bias {
            state.saturating_sub(1)
        } else if state + 1 < self.size {
            state + 1
        } else {
            state
        })
    }
}

impl EnumerableChain for BiasedLineChain {
    fn num_states(&self) -> usize {
        self.size
    }

    fn transition_matrix(&self) -> DMatrix<f64> {
        let n = self.size;
        let (down, up) = (0.5 * self.bias, 0.5 * (1.0 - self.bias));
        let mut p = DMatrix::zeros(n, n);
        for x in 0..n {
            p[(x, x)] = 0.5;
            if x > 0 {
                p[(x, x - 1)] = down;
            } else {
                p[(x, x)] += down;
            }
            if x + 1 < n {
                p[(x, x + 1)] = up;
            } else {
                p[(x, x)] += up;
            }
        }
        p
    }

    fn stationary_distribution(&self) -> Result<Vec<f64>> {
        Ok(line_stationary(self.size, self.bias))
    }
}

/// `π(x) ∝ (1/p - 1)^x` on `0..size` (uniform at `p = 1/2`), normalized.
pub fn line_stationary(size: usize, p: f64) -> Vec<f64> {
    if p == 0.5 {
        return vec![1.0 / size as f64; size];
    }
    let log_ratio = (1.0 / p - 1.0).ln();
    // shift the exponent so the largest weight is 1
    let top = if log_ratio > 0.0 {
        (size - 1) as f64 * log_ratio
    } else {
        0.0
    };
    let weights: Vec<f64> = (0..size).map(|x| (x as f64 * log_ratio - top).exp()).collect();
    let sum: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / sum).collect()
}
