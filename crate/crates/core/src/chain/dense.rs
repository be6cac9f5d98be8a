use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use super::exact::EnumerableChain;
use super::TransitionOracle;
use crate::error::{Error, OracleError, Result};

const ROW_SUM_TOLERANCE: f64 = 1e-10;

/// Chain given by an explicit row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrixChain {
    matrix: DMatrix<f64>,
    /// Row-wise cumulative sums, last entry forced to 1.
    cumulative: DMatrix<f64>,
}

impl DenseMatrixChain {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::Chain(format!(
                "transition matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for x in 0..n {
            let row = matrix.row(x);
            if let Some(bad) = row.iter().find(|&&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::Chain(format!("row {x} has invalid entry {bad}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Chain(format!("row {x} sums to {sum}")));
            }
        }
        let mut cumulative = matrix.clone();
        for x in 0..n {
            let mut acc = 0.0;
            for y in 0..n {
                acc += matrix[(x, y)];
                cumulative[(x, y)] = acc;
            }
            // entries after the last positive one must never be drawn
            let last = (0..n).rev().find(|&y| matrix[(x, y)] > 0.0).unwrap_or(n - 1);
            for y in last..n {
                cumulative[(x, y)] = 1.0;
            }
        }
        Ok(Self { matrix, cumulative })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Chain("rows have inconsistent lengths".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |x, y| rows[x][y]))
    }

    /// Parses the text format: first line `|Ω|`, then `|Ω|` lines of `|Ω|`
    /// whitespace-separated probabilities.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing state count".into(),
        })?;
        let header = header?;
        let n: usize = header.trim().parse().map_err(|e| Error::Parse {
            line: 1,
            message: format!("state count {:?}: {e}", header.trim()),
        })?;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let (i, line) = lines.next().ok_or(Error::Parse {
                line: rows.len() + 2,
                message: format!("expected {n} matrix rows, found {}", rows.len()),
            })?;
            let line = line?;
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if row.len() != n {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {n} entries, found {}", row.len()),
                });
            }
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.matrix.nrows();
        writeln!(out, "{n}")?;
        for x in 0..n {
            let row: Vec<String> = self.matrix.row(x).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl TransitionOracle for DenseMatrixChain {
    fn state_space_size(&self) -> usize {
        self.matrix.nrows()
    }

    fn next_state(&self, state: usize, rng: &mut dyn RngCore) -> Result<usize, OracleError> {
        let n = self.matrix.nrows();
        if state >= n {
            return Err(OracleError(format!("state {state} out of range 0..{n}")));
        }
        let u: f64 = rng.random();
        let row = self.cumulative.row(state);
        // first y with cumulative > u
        let (mut lo, mut hi) = (0, n - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if row[mid] > u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(lo)
    }
}

impl EnumerableChain for DenseMatrixChain {
    fn num_states(&self) -> usize {
        self.matrix.nrows()
    }

    fn transition_matrix(&self) -> DMatrix<f64> {
        self.matrix.clone()
    }
}
