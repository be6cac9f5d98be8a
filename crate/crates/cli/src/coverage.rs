use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::experiment::{run_experiment, ExperimentSpec};
use crate::report::ExperimentReport;

pub const MIN_COVERAGE_TRIALS: u64 = 200;

/// Normal quantile used for the Wilson interval.
pub const WILSON_Z: f64 = 3.0;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub chain: String,
    pub trials: u64,
    /// Exact value the bound must dominate.
    pub target: f64,
    pub confidence: f64,
    /// Trials whose bound fell below `target`.
    pub violations: u64,
    pub violation_frequency: f64,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    pub wilson_z: f64,
    /// The interval's lower edge does not exceed `confidence`.
    pub pass: bool,
    pub experiment: ExperimentReport,
}

impl CoverageReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "chain            {}", self.chain);
        let _ = writeln!(s, "target           {:.6}", self.target);
        let _ = writeln!(s, "trials           {}", self.trials);
        let _ = writeln!(s, "violations       {}", self.violations);
        let _ = writeln!(s, "frequency        {:.4}", self.violation_frequency);
        let _ = writeln!(
            s,
            "wilson (z = {})   [{:.4}, {:.4}]",
            self.wilson_z, self.wilson_lower, self.wilson_upper
        );
        let _ = writeln!(s, "delta            {:.6}", self.confidence);
        let _ = writeln!(s, "result           {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

/// Runs `spec.trials` executions and counts how often the bound misses the
/// exact `λ⋆` (or `λ₂` for lazy runs). Needs an enumerable chain.
pub fn coverage_study(spec: &ExperimentSpec) -> Result<CoverageReport> {
    if spec.trials < MIN_COVERAGE_TRIALS {
        return config(format!(
            "a coverage study needs at least {MIN_COVERAGE_TRIALS} trials, got {}",
            spec.trials
        ));
    }
    let chain = spec.chain.build()?;
    let Some(spectrum) = chain.spectrum() else {
        return config(format!(
            "{} has no exact spectrum (too large or not reversible); coverage cannot be checked",
            spec.chain.describe()
        ));
    };
    let target = if spec.nonlazy {
        spectrum.lambda_star()
    } else {
        spectrum.lambda2()
    };
    let experiment = run_experiment(spec)?;
    let violations = experiment.trials.iter().filter(|t| t.ell_star < target).count() as u64;
    let (lower, upper) = wilson_interval(violations, spec.trials, WILSON_Z);
    Ok(CoverageReport {
        chain: experiment.chain.clone(),
        trials: spec.trials,
        target,
        confidence: experiment.confidence,
        violations,
        violation_frequency: violations as f64 / spec.trials as f64,
        wilson_lower: lower,
        wilson_upper: upper,
        wilson_z: WILSON_Z,
        pass: lower <= experiment.confidence,
        experiment,
    })
}
