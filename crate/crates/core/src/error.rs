use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("accumulator has {actual} entries, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("accumulator holds {actual} completed paths, configuration expects {expected}")]
    PathCount { expected: u64, actual: u64 },

    #[error("invalid spectrum: {0}")]
    Spectrum(String),

    #[error("invalid chain: {0}")]
    Chain(String),

    #[error("chain is not reversible: |pi(x)P(x,y) - pi(y)P(y,x)| = {gap:e} at ({x}, {y})")]
    NotReversible { x: usize, y: usize, gap: f64 },

    #[error("no simple connected {degree}-regular graph on {size} vertices after {attempts} attempts")]
    GraphGeneration {
        size: usize,
        degree: usize,
        attempts: usize,
    },

    #[error("state {state} out of range for a chain with {size} states")]
    StateOutOfRange { state: usize, size: usize },

    #[error("initial sampler: {0}")]
    Sampler(String),

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failure reported by a user-supplied transition oracle.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transition oracle failed: {0}")]
pub struct OracleError(pub String);

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}
