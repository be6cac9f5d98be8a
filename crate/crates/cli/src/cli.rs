use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::coverage::{coverage_study, MIN_COVERAGE_TRIALS};
use crate::error::{config, Result};
use crate::experiment::{run_experiment, ChainSpec, ExperimentSpec, Model, OutputFormat};
use crate::report::write_trials_csv;
use crate::tables::{reproduce_tables, TablesSpec};

#[derive(Debug, Parser)]
#[command(
    name = "ucpi",
    version,
    about = "Upper confidence bounds on the relaxation time of Markov chains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run seeded trials on one chain and report the bounds.
    Run(RunArgs),
    /// Check how often the bound falls below the exact eigenvalue.
    Coverage(RunArgs),
    /// Run the line and regular-graph grids and the informativeness study.
    Tables(TablesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChainKind {
    Line,
    Regular,
    Matrix,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long, value_enum, default_value = "line")]
    pub chain: ChainKind,
    /// Number of states (default 20 for line, 100 for regular).
    #[arg(long)]
    pub size: Option<usize>,
    /// Probability of stepping down on the line.
    #[arg(long, default_value_t = 0.9)]
    pub p: f64,
    /// Degree of the regular graph.
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub graph_seed: u64,
    /// Row-stochastic matrix: first line the size, then one row per line.
    #[arg(long)]
    pub matrix_file: Option<PathBuf>,
}

impl ChainArgs {
    pub fn to_spec(&self) -> Result<ChainSpec> {
        Ok(match self.chain {
            ChainKind::Line => ChainSpec::Line {
                size: self.size.unwrap_or(20),
                bias: self.p,
            },
            ChainKind::Regular => ChainSpec::Regular {
                size: self.size.unwrap_or(100),
                degree: self.d,
                graph_seed: self.graph_seed,
            },
            ChainKind::Matrix => match &self.matrix_file {
                Some(path) => ChainSpec::Matrix { path: path.clone() },
                None => return config("--chain matrix needs --matrix-file"),
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, value_enum, default_value = "rtf")]
    pub model: Model,
    /// Oracle-call budget per trial.
    #[arg(long)]
    pub n: u64,
    /// Number of paths, overriding the default.
    #[arg(long = "I")]
    pub num_paths: Option<u64>,
    /// Maximal path length, overriding the default.
    #[arg(long = "K")]
    pub max_path_length: Option<usize>,
    /// Confidence level, overriding 1/sqrt(n).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Defaults to 1 for run and 200 for coverage.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trajectory file (one state per line) for the usp model.
    #[arg(long)]
    pub usp_path: Option<PathBuf>,
    /// Estimate on the squared chain; no laziness needed.
    #[arg(long)]
    pub nonlazy: bool,
    /// Start distribution, one probability per line.
    #[arg(long)]
    pub mu_file: Option<PathBuf>,
    /// Leave wall-clock time out of the report.
    #[arg(long)]
    pub no_timing: bool,
}

impl RunArgs {
    pub fn to_spec(&self, default_trials: u64) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::new(self.chain.to_spec()?, self.n);
        spec.model = self.model;
        spec.num_paths = self.num_paths;
        spec.max_path_length = self.max_path_length;
        spec.confidence = self.delta;
        spec.seed = self.seed;
        spec.workers = self.workers.unwrap_or_else(default_workers);
        spec.trials = self.trials.unwrap_or(default_trials);
        spec.output_format = self.format;
        spec.nonlazy = self.nonlazy;
        spec.mu_file = self.mu_file.clone();
        spec.usp_path = self.usp_path.clone();
        spec.record_timing = !self.no_timing;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// Largest budget in the grid; 100000000 runs every row.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_n: u64,
    /// Repetitions per instance for the informativeness table.
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub graph_seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn open_output<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

/// Runs a parsed command, writing results to `stdout` or `--out`. Returns
/// the process exit code: 0, or 1 when a coverage study fails.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Run(args) => {
            let spec = args.to_spec(1)?;
            let report = run_experiment(&spec)?;
            let mut out = open_output(&args.out, stdout)?;
            report.write(spec.output_format, &mut out)?;
            out.flush()?;
            Ok(0)
        }
        Command::Coverage(args) => {
            let spec = args.to_spec(MIN_COVERAGE_TRIALS)?;
            let report = coverage_study(&spec)?;
            let mut out = open_output(&args.out, stdout)?;
            match spec.output_format {
                OutputFormat::Table => out.write_all(report.to_table().as_bytes())?,
                OutputFormat::Json => {
                    serde_json::to_writer_pretty(&mut out, &report)?;
                    writeln!(out)?;
                }
                OutputFormat::Csv => write_trials_csv(&report.experiment.trials, &mut out)?,
            }
            out.flush()?;
            Ok(if report.pass { 0 } else { 1 })
        }
        Command::Tables(args) => {
            if args.format == OutputFormat::Csv {
                return config("tables support --format table or json");
            }
            let spec = TablesSpec {
                max_n: args.max_n,
                trials: args.trials,
                seed: args.seed,
                workers: args.workers.unwrap_or_else(default_workers),
                graph_seed: args.graph_seed,
            };
            let tables = reproduce_tables(&spec)?;
            let mut out = open_output(&args.out, stdout)?;
            match args.format {
                OutputFormat::Json => {
                    serde_json::to_writer_pretty(&mut out, &tables)?;
                    writeln!(out)?;
                }
                _ => out.write_all(tables.to_text().as_bytes())?,
            }
            out.flush()?;
            Ok(0)
        }
    }
}
