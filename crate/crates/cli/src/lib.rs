//! Command-line harness around the `ucpi` estimator: seeded experiments on
//! built-in or user-supplied chains, coverage studies against exact spectra,
//! and the line / regular-graph result grids.

pub mod cli;
pub mod coverage;
pub mod error;
pub mod experiment;
pub mod report;
pub mod tables;

pub use coverage::{coverage_study, wilson_interval, CoverageReport};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, ChainSpec, ExperimentSpec, Model, OutputFormat};
pub use report::{ExperimentReport, TrialSummary};
pub use tables::{reproduce_tables, Tables, TablesSpec};
