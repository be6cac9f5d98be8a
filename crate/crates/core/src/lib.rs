//! Upper confidence bounds on the second eigenvalue of a reversible Markov
//! chain, computed from simulated sample paths only.
//!
//! For a lazy reversible chain on `Ω` with eigenvalues `1 = λ₁ > λ₂ ≥ … ≥ 0`,
//! the probability `m_k` that a path started uniformly sits at its start
//! after `k` steps equals `tr(P^k)/|Ω|`, and `(|Ω| m_k - 1)^{1/k} → λ₂`. The
//! estimator counts returns over `I` paths of length `K`, replaces each
//! empirical frequency by a KL confidence upper bound and keeps the smallest
//! resulting bound over `k`. Memory is `O(K)`, independent of `|Ω|`.
//!
//! ```
//! use ucpi::chain::{BiasedLineChain, UniformSampler};
//! use ucpi::estimator::UcpiConfig;
//! use ucpi::sampling::RtfEngine;
//!
//! let chain = BiasedLineChain::new(20, 0.9).unwrap();
//! let start = UniformSampler::new(20).unwrap();
//! let cfg = UcpiConfig::from_budget(20, 100_000).unwrap();
//! let est = RtfEngine::new(&chain, &start, cfg).seed(7).estimate().unwrap();
//! assert!(est.ell_star <= 1.0);
//! ```

pub mod chain;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod extensions;
pub mod kl;
pub mod rng;
pub mod sampling;

pub use error::{Error, OracleError, Result};
pub use estimator::{
    default_parameters, finalize_estimate, merge_accumulators, plugin_bound, relaxation_upper_bound,
    validity_check, ReturnCountAccumulator, UcpiConfig, UcpiEstimate,
};
pub use kl::{bernoulli_kl, confidence_upper_bound};
