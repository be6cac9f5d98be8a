//! Exact oracles for chains small enough to hold as a dense matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest state space the dense oracles accept.
pub const MAX_EXACT_STATES: usize = 2000;

const REVERSIBILITY_TOLERANCE: f64 = 1e-8;

/// A chain whose full transition matrix can be materialized.
pub trait EnumerableChain {
    fn num_states(&self) -> usize;

    fn transition_matrix(&self) -> DMatrix<f64>;

    fn stationary_distribution(&self) -> Result<Vec<f64>> {
        solve_stationary(&self.transition_matrix())
    }
}

/// Eigenvalues of a reversible transition matrix, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    /// Largest modulus among the non-unit eigenvalues.
    pub fn lambda_star(&self) -> f64 {
        self.eigenvalues[1..].iter().fold(0.0, |a, l| a.max(l.abs()))
    }

    pub fn relaxation_time(&self) -> f64 {
        1.0 / (1.0 - self.lambda_star())
    }

    /// `Σ_i λ_i^k = tr(P^k)`.
    pub fn trace_power(&self, k: usize) -> f64 {
        self.eigenvalues.iter().map(|l| l.powi(k as i32)).sum()
    }

    /// `m_k = tr(P^k) / |Ω|`, the return probability under a uniform start.
    pub fn return_probability(&self, k: usize) -> f64 {
        self.trace_power(k) / self.eigenvalues.len() as f64
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_EXACT_STATES {
        return Err(Error::Chain(format!(
            "exact oracles need 1..={MAX_EXACT_STATES} states, got {n}"
        )));
    }
    Ok(())
}

/// Stationary distribution of an irreducible chain from `π(P - I) = 0`,
/// `Σ π = 1`.
pub fn solve_stationary(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    check_size(n)?;
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Chain("stationary system is singular (reducible chain?)".into()))?;
    if pi.iter().any(|&x| x.is_nan() || x <= 0.0 || !x.is_finite()) {
        return Err(Error::Chain(
            "stationary distribution is not strictly positive (reducible chain?)".into(),
        ));
    }
    let sum = pi.sum();
    Ok(pi.iter().map(|x| x / sum).collect())
}

/// Detailed balance `π(x)P(x,y) = π(y)P(y,x)` for every pair, within `tol`.
pub fn check_reversible(p: &DMatrix<f64>, pi: &[f64], tol: f64) -> Result<()> {
    let n = p.nrows();
    for x in 0..n {
        for y in (x + 1)..n {
            let gap = (pi[x] * p[(x, y)] - pi[y] * p[(y, x)]).abs();
            if gap > tol {
                return Err(Error::NotReversible { x, y, gap });
            }
        }
    }
    Ok(())
}

/// Eigenvalues of `P` via the symmetric matrix `D^{1/2} P D^{-1/2}`,
/// `D = diag(π)`.
pub fn exact_spectrum<C: EnumerableChain + ?Sized>(chain: &C) -> Result<Spectrum> {
    let n = chain.num_states();
    check_size(n)?;
    let p = chain.transition_matrix();
    let pi = chain.stationary_distribution()?;
    if pi.iter().any(|&x| x.is_nan() || x <= 0.0) {
        return Err(Error::Chain("stationary distribution must be positive".into()));
    }
    check_reversible(&p, &pi, REVERSIBILITY_TOLERANCE)?;
    let root: Vec<f64> = pi.iter().map(|x| x.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |x, y| root[x] * p[(x, y)] / root[y]);
    let sym = (&s + s.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    if (eigenvalues[0] - 1.0).abs() > 1e-8 {
        return Err(Error::Chain(format!(
            "leading eigenvalue {} differs from 1",
            eigenvalues[0]
        )));
    }
    Ok(Spectrum { eigenvalues })
}

/// `tr(P^k)` by binary powering.
pub fn trace_of_power<C: EnumerableChain + ?Sized>(chain: &C, k: usize) -> Result<f64> {
    check_size(chain.num_states())?;
    let n = chain.num_states();
    let mut base = chain.transition_matrix();
    let mut acc = DMatrix::<f64>::identity(n, n);
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    Ok(acc.trace())
}

/// `[tr(P), tr(P²), …, tr(P^max_k)]`.
pub fn trace_of_powers<C: EnumerableChain + ?Sized>(chain: &C, max_k: usize) -> Result<Vec<f64>> {
    check_size(chain.num_states())?;
    let p = chain.transition_matrix();
    let mut power = p.clone();
    let mut out = Vec::with_capacity(max_k);
    for k in 1..=max_k {
        if k > 1 {
            power = &power * &p;
        }
        out.push(power.trace());
    }
    Ok(out)
}

/// Transition frequencies observed along one path. Rows of states the path
/// never left are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTransitions {
    pub rows: Vec<Option<Vec<f64>>>,
    pub visits: Vec<u64>,
}

pub fn empirical_transition_matrix(path: &[usize], size: usize) -> Result<EmpiricalTransitions> {
    if let Some(&state) = path.iter().find(|&&s| s >= size) {
        return Err(Error::StateOutOfRange { state, size });
    }
    let mut counts = vec![vec![0u64; size]; size];
    let mut visits = vec![0u64; size];
    for w in path.windows(2) {
        counts[w[0]][w[1]] += 1;
        visits[w[0]] += 1;
    }
    let rows = counts
        .into_iter()
        .zip(&visits)
        .map(|(row, &v)| (v > 0).then(|| row.iter().map(|&c| c as f64 / v as f64).collect()))
        .collect();
    Ok(EmpiricalTransitions { rows, visits })
}
