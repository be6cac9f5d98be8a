//! Error terms and scaling quantities computed from a known spectrum.
//!
//! These are not used by the estimator itself. They describe, for a chain
//! whose eigenvalues are known, how the bias `E_{k,1}` and the deviation term
//! `E_{k,2}` trade off as the path length `k` grows, and where the best `k`
//! is expected to sit.

use crate::error::{Error, Result};
use crate::estimator::UcpiConfig;

/// Slack allowed on the leading eigenvalue and on `[0, 1]` membership.
const SPECTRUM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryDiagnostics {
    pub lambda2: f64,
    /// 0 when the spectrum has only two eigenvalues.
    pub lambda3: f64,
    /// `ln(1/λ₂) / ln(1/λ₃)`; `None` when `λ₃ = 0 < λ₂`.
    pub r: Option<f64>,
    /// Exact return probabilities `m_k = (1/|Ω|) Σ λ_i^k`.
    pub return_probability: Vec<f64>,
    /// `E_{k,1} = (|Ω| m_k - 1)^{1/k} - λ₂`.
    pub bias: Vec<f64>,
    /// `E_{k,2}`, using `ln(K/δ)`.
    pub stddev: Vec<f64>,
    /// `E_k = E_{k,1} + E_{k,2}`.
    pub total: Vec<f64>,
    /// `Δ(K, I, δ) = 64 ln(K/δ) / (|Ω| I)`.
    pub delta_quantity: f64,
    /// `ln(1/Δ) / (2 ln(1/λ₃))`; `None` when `λ₃ = 0`.
    pub k_star: Option<f64>,
    /// Whether `k⋆ ≤ K` and `λ₂^{k⋆} ≤ 1/|Ω|` both hold.
    pub scaling_conditions_hold: Option<bool>,
    /// Bound on `min_k E_k` with the constant 128 inside the power term.
    pub scaling_bound_128: Option<f64>,
    /// The same bound with the constant 64, as obtained in the derivation.
    pub scaling_bound_64: Option<f64>,
    /// Asymptotic variance of `√I (q̂_k - q_k)` from the delta method.
    pub asymptotic_variance: Vec<f64>,
}

impl TheoryDiagnostics {
    /// Path length minimizing `E_k` (1-based).
    pub fn best_k(&self) -> usize {
        self.total
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b })
            .0
            + 1
    }
}

fn check_spectrum(spectrum: &[f64]) -> Result<Vec<f64>> {
    if spectrum.len() < 2 {
        return Err(Error::Spectrum("need at least two eigenvalues".into()));
    }
    if (spectrum[0] - 1.0).abs() > SPECTRUM_TOLERANCE {
        return Err(Error::Spectrum(format!(
            "leading eigenvalue is {}, not 1",
            spectrum[0]
        )));
    }
    for w in spectrum.windows(2) {
        if w[1] > w[0] + SPECTRUM_TOLERANCE {
            return Err(Error::Spectrum("eigenvalues are not sorted descending".into()));
        }
    }
    if let Some(&bad) = spectrum
        .iter()
        .find(|&&l| !(-SPECTRUM_TOLERANCE..=1.0 + SPECTRUM_TOLERANCE).contains(&l))
    {
        return Err(Error::Spectrum(format!("eigenvalue {bad} outside [0, 1]")));
    }
    let mut clean: Vec<f64> = spectrum.iter().map(|l| l.clamp(0.0, 1.0)).collect();
    clean[0] = 1.0;
    if clean[1] >= 1.0 {
        return Err(Error::Spectrum("second eigenvalue must be below 1".into()));
    }
    Ok(clean)
}

/// Computes all diagnostics for a lazy reversible chain with the given
/// (descending) spectrum under `cfg`.
pub fn theory_diagnostics(spectrum: &[f64], cfg: &UcpiConfig) -> Result<TheoryDiagnostics> {
    cfg.validate()?;
    let eig = check_spectrum(spectrum)?;
    let size = eig.len() as f64;
    if eig.len() != cfg.state_space_size {
        return Err(Error::Spectrum(format!(
            "{} eigenvalues for a state space of size {}",
            eig.len(),
            cfg.state_space_size
        )));
    }
    let lambda2 = eig[1];
    let lambda3 = eig.get(2).copied().unwrap_or(0.0);
    let big_k = cfg.max_path_length;
    let paths = cfg.num_paths as f64;
    let log_k_delta = (big_k as f64 / cfg.confidence).ln();

    let mut return_probability = Vec::with_capacity(big_k);
    let mut bias = Vec::with_capacity(big_k);
    let mut stddev = Vec::with_capacity(big_k);
    let mut asymptotic_variance = Vec::with_capacity(big_k);
    // powers[i] = λ_{i+2}^k, updated in place
    let mut powers: Vec<f64> = eig[1..].to_vec();
    for k in 1..=big_k {
        if k > 1 {
            for (p, l) in powers.iter_mut().zip(&eig[1..]) {
                *p *= l;
            }
        }
        let kf = k as f64;
        // |Ω| m_k - 1, summed without cancellation
        let tail: f64 = powers.iter().sum();
        let m = (1.0 + tail) / size;
        return_probability.push(m);
        bias.push(tail.powf(1.0 / kf) - lambda2);
        stddev.push(size * (32.0 * m * log_k_delta).sqrt() / (paths.sqrt() * kf * tail.powf(1.0 - 1.0 / kf)));
        asymptotic_variance.push(m * (1.0 - m) * size * size / (kf * kf) * tail.powf(2.0 * (1.0 - kf) / kf));
    }
    let total = bias.iter().zip(&stddev).map(|(b, s)| b + s).collect();

    let delta_quantity = 64.0 * log_k_delta / (size * paths);
    let r = if lambda2 > 0.0 && lambda3 == lambda2 {
        Some(1.0)
    } else if lambda3 > 0.0 {
        Some(lambda2.ln() / lambda3.ln())
    } else {
        None
    };
    let k_star = (lambda3 > 0.0).then(|| (1.0 / delta_quantity).ln() / (2.0 * (1.0 / lambda3).ln()));
    let scaling_conditions_hold = k_star.map(|ks| ks <= big_k as f64 && lambda2.powf(ks) <= 1.0 / size);
    let scaling_bound = |constant: f64| {
        r.map(|r| {
            let x = log_k_delta / (size * paths);
            4.0 * size * (1.0 / lambda3).ln() / (1.0 / (64.0 * x)).ln() * (constant * x).powf((1.0 - r) / 2.0)
        })
    };

    Ok(TheoryDiagnostics {
        lambda2,
        lambda3,
        r,
        return_probability,
        bias,
        stddev,
        total,
        delta_quantity,
        k_star,
        scaling_conditions_hold,
        scaling_bound_128: scaling_bound(128.0),
        scaling_bound_64: scaling_bound(64.0),
        asymptotic_variance,
    })
}
