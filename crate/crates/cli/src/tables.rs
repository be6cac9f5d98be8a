use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiment::{run_experiment, ChainSpec, ExperimentSpec};
use crate::report::{fmt_value, inf_float};

/// Placeholder for comparison columns filled by an external estimator.
pub const BASELINE: &str = "n/a (external baseline)";

pub const BUDGETS: [u64; 5] = [10_000, 100_000, 1_000_000, 10_000_000, 100_000_000];
pub const LINE_BIASES: [f64; 3] = [0.5, 0.7, 0.9];
pub const REGULAR_DEGREES: [usize; 2] = [5, 10];
pub const LINE_SIZE: usize = 20;
pub const REGULAR_SIZE: usize = 100;
pub const INFORMATIVENESS_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablesSpec {
    /// Largest budget in the grid.
    pub max_n: u64,
    /// Repetitions per instance in the informativeness table.
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub graph_seed: u64,
}

impl Default for TablesSpec {
    fn default() -> Self {
        Self {
            max_n: 1_000_000,
            trials: 20,
            seed: 0,
            workers: 1,
            graph_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub n: u64,
    pub ell_star: f64,
    #[serde(with = "inf_float")]
    pub t_r_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceBlock {
    pub instance: String,
    pub exact_lambda_star: f64,
    #[serde(with = "inf_float")]
    pub exact_relaxation_time: f64,
    pub rows: Vec<BudgetRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformativenessRow {
    pub instance: String,
    pub exact_lambda_star: f64,
    pub n: u64,
    pub trials: u64,
    pub informative_frequency: f64,
    pub coverage_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub line: Vec<InstanceBlock>,
    pub regular: Vec<InstanceBlock>,
    pub informativeness: Vec<InformativenessRow>,
}

fn instances(spec: &TablesSpec) -> (Vec<ChainSpec>, Vec<ChainSpec>) {
    let line = LINE_BIASES
        .iter()
        .map(|&bias| ChainSpec::Line {
            size: LINE_SIZE,
            bias,
        })
        .collect();
    let regular = REGULAR_DEGREES
        .iter()
        .map(|&degree| ChainSpec::Regular {
            size: REGULAR_SIZE,
            degree,
            graph_seed: spec.graph_seed,
        })
        .collect();
    (line, regular)
}

fn experiment(spec: &TablesSpec, chain: ChainSpec, n: u64, trials: u64, salt: u64) -> ExperimentSpec {
    let mut e = ExperimentSpec::new(chain, n);
    e.seed = ucpi::rng::derive_seed(spec.seed, salt);
    e.workers = spec.workers;
    e.trials = trials;
    e
}

fn block(spec: &TablesSpec, chain: ChainSpec, salt: u64) -> Result<InstanceBlock> {
    let mut rows = Vec::new();
    let mut exact = (f64::NAN, f64::NAN);
    for (i, &n) in BUDGETS.iter().filter(|&&n| n <= spec.max_n).enumerate() {
        let report = run_experiment(&experiment(spec, chain.clone(), n, 1, salt * 16 + i as u64))?;
        exact = (
            report.exact_lambda_star.unwrap_or(f64::NAN),
            report.exact_relaxation_time.unwrap_or(f64::NAN),
        );
        let t = &report.trials[0];
        rows.push(BudgetRow {
            n,
            ell_star: t.ell_star,
            t_r_upper: t.t_r_upper,
        });
    }
    if rows.is_empty() {
        let spectrum = chain.build()?.spectrum();
        exact = spectrum.map_or(exact, |s| (s.lambda_star(), s.relaxation_time()));
    }
    Ok(InstanceBlock {
        instance: chain.describe(),
        exact_lambda_star: exact.0,
        exact_relaxation_time: exact.1,
        rows,
    })
}

/// Runs the line and regular-graph grids up to `max_n` and the
/// informativeness study over all five instances.
pub fn reproduce_tables(spec: &TablesSpec) -> Result<Tables> {
    let (line, regular) = instances(spec);
    let mut salt = 0;
    let mut next = || {
        salt += 1;
        salt
    };
    let line_blocks = line
        .iter()
        .map(|c| block(spec, c.clone(), next()))
        .collect::<Result<Vec<_>>>()?;
    let regular_blocks = regular
        .iter()
        .map(|c| block(spec, c.clone(), next()))
        .collect::<Result<Vec<_>>>()?;
    let n = INFORMATIVENESS_BUDGET.min(spec.max_n);
    let informativeness = line
        .iter()
        .chain(&regular)
        .map(|c| {
            let report = run_experiment(&experiment(spec, c.clone(), n, spec.trials, 1000 + next()))?;
            Ok(InformativenessRow {
                instance: report.chain.clone(),
                exact_lambda_star: report.exact_lambda_star.unwrap_or(f64::NAN),
                n,
                trials: spec.trials,
                informative_frequency: report.informative_frequency,
                coverage_frequency: report.coverage_frequency.unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Tables {
        line: line_blocks,
        regular: regular_blocks,
        informativeness,
    })
}

fn write_blocks(s: &mut String, title: &str, blocks: &[InstanceBlock]) {
    let _ = writeln!(s, "{title}");
    for b in blocks {
        let _ = writeln!(
            s,
            "  {}: lambda* = {:.4}, t_r = {}",
            b.instance,
            b.exact_lambda_star,
            fmt_value(b.exact_relaxation_time)
        );
        let _ = writeln!(
            s,
            "  {:>10} {:>10} {:>10}   baseline",
            "n", "ell_star", "t_r_upper"
        );
        for r in &b.rows {
            let _ = writeln!(
                s,
                "  {:>10} {:>10.4} {:>10}   {BASELINE}",
                r.n,
                r.ell_star,
                fmt_value(r.t_r_upper)
            );
        }
    }
    let _ = writeln!(s);
}

impl Tables {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write_blocks(&mut s, "Line chains, 20 states", &self.line);
        write_blocks(&mut s, "Random regular graphs, 100 vertices", &self.regular);
        let _ = writeln!(s, "Share of finite bounds per instance");
        let _ = writeln!(
            s,
            "  {:<36} {:>8} {:>10} {:>7} {:>12} {:>9}   baseline",
            "instance", "lambda*", "n", "trials", "informative", "coverage"
        );
        for r in &self.informativeness {
            let _ = writeln!(
                s,
                "  {:<36} {:>8.4} {:>10} {:>7} {:>12.3} {:>9.3}   {BASELINE}",
                r.instance, r.exact_lambda_star, r.n, r.trials, r.informative_frequency, r.coverage_frequency
            );
        }
        s
    }
}
