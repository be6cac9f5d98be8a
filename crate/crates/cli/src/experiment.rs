use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use ucpi::chain::{
    exact_spectrum, generate_regular_graph, BiasedLineChain, CountingOracle, DenseMatrixChain,
    DiscreteSampler, EnumerableChain, RegularGraphChain, Spectrum, TransitionOracle, UniformSampler,
    MAX_EXACT_STATES,
};
use ucpi::extensions::{estimate_nonlazy, finalize_weighted, weighted_collect};
use ucpi::rng::{derive_seed, path_rng};
use ucpi::sampling::{states_from_reader, usp_collect, OracleTrajectory, RtfEngine, UspEngine};
use ucpi::{default_parameters, finalize_estimate, relaxation_upper_bound, UcpiConfig, UcpiEstimate};

use crate::error::{config, Result};
use crate::report::{ExperimentReport, TrialSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChainSpec {
    Line {
        size: usize,
        bias: f64,
    },
    Regular {
        size: usize,
        degree: usize,
        graph_seed: u64,
    },
    Matrix {
        path: PathBuf,
    },
}

impl ChainSpec {
    pub fn build(&self) -> Result<BuiltChain> {
        Ok(match self {
            ChainSpec::Line { size, bias } => BuiltChain::Line(BiasedLineChain::new(*size, *bias)?),
            ChainSpec::Regular {
                size,
                degree,
                graph_seed,
            } => BuiltChain::Regular(generate_regular_graph(*size, *degree, *graph_seed)?),
            ChainSpec::Matrix { path } => {
                let file = File::open(path).map_err(|e| {
                    crate::error::CliError::Config(format!("cannot open matrix file {}: {e}", path.display()))
                })?;
                BuiltChain::Matrix(DenseMatrixChain::from_reader(BufReader::new(file))?)
            }
        })
    }

    pub fn describe(&self) -> String {
        match self {
            ChainSpec::Line { size, bias } => format!("line({size}, {bias})"),
            ChainSpec::Regular {
                size,
                degree,
                graph_seed,
            } => format!("regular({size}, {degree}, graph seed {graph_seed})"),
            ChainSpec::Matrix { path } => format!("matrix({})", path.display()),
        }
    }
}

pub enum BuiltChain {
    Line(BiasedLineChain),
    Regular(RegularGraphChain),
    Matrix(DenseMatrixChain),
}

impl BuiltChain {
    pub fn oracle(&self) -> &dyn TransitionOracle {
        match self {
            BuiltChain::Line(c) => c,
            BuiltChain::Regular(c) => c,
            BuiltChain::Matrix(c) => c,
        }
    }

    pub fn size(&self) -> usize {
        self.oracle().state_space_size()
    }

    /// `None` when the chain is too large for the dense eigensolver.
    pub fn enumerable(&self) -> Option<&dyn EnumerableChain> {
        if self.size() > MAX_EXACT_STATES {
            return None;
        }
        Some(match self {
            BuiltChain::Line(c) => c,
            BuiltChain::Regular(c) => c,
            BuiltChain::Matrix(c) => c,
        })
    }

    pub fn spectrum(&self) -> Option<Spectrum> {
        self.enumerable().and_then(|c| exact_spectrum(c).ok())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Rtf,
    Usp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub chain: ChainSpec,
    pub model: Model,
    /// `n`, the number of oracle calls each trial may make.
    pub budget: u64,
    pub num_paths: Option<u64>,
    pub max_path_length: Option<usize>,
    pub confidence: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    pub trials: u64,
    pub output_format: OutputFormat,
    pub nonlazy: bool,
    pub mu_file: Option<PathBuf>,
    pub usp_path: Option<PathBuf>,
    pub record_timing: bool,
}

impl ExperimentSpec {
    pub fn new(chain: ChainSpec, budget: u64) -> Self {
        Self {
            chain,
            model: Model::Rtf,
            budget,
            num_paths: None,
            max_path_length: None,
            confidence: None,
            seed: 0,
            workers: 1,
            trials: 1,
            output_format: OutputFormat::Table,
            nonlazy: false,
            mu_file: None,
            usp_path: None,
            record_timing: false,
        }
    }

    /// Oracle calls per simulated step: two when running on `P²`.
    fn calls_per_step(&self) -> u64 {
        if self.nonlazy {
            2
        } else {
            1
        }
    }

    /// The estimator configuration, from [`default_parameters`] of the
    /// effective budget with any overrides applied.
    pub fn resolve(&self, state_space_size: usize) -> Result<UcpiConfig> {
        if self.budget == 0 {
            return config("budget --n must be positive");
        }
        if self.workers == 0 {
            return config("--workers must be at least 1");
        }
        if self.trials == 0 {
            return config("--trials must be at least 1");
        }
        if self.model == Model::Usp && (self.nonlazy || self.mu_file.is_some()) {
            return config("--nonlazy and --mu-file apply to the rtf model only");
        }
        if self.nonlazy && self.mu_file.is_some() {
            return config("--nonlazy cannot be combined with --mu-file");
        }
        if self.usp_path.is_some() && self.model != Model::Usp {
            return config("--usp-path requires --model usp");
        }
        let effective = self.budget / self.calls_per_step();
        let defaults = default_parameters(effective).map_err(|e| {
            crate::error::CliError::Config(format!("budget n = {} is too small: {e}", self.budget))
        })?;
        let cfg = UcpiConfig::new(
            state_space_size,
            self.num_paths.unwrap_or(defaults.num_paths),
            self.max_path_length.unwrap_or(defaults.max_path_length),
            self.confidence.unwrap_or(defaults.confidence),
        )?;
        let calls = cfg
            .num_paths
            .checked_mul(cfg.max_path_length as u64)
            .and_then(|c| c.checked_mul(self.calls_per_step()));
        if self.model == Model::Rtf && calls.is_none_or(|c| c > self.budget) {
            return config(format!(
                "I = {} paths of length K = {} need more than the budget n = {} oracle calls",
                cfg.num_paths, cfg.max_path_length, self.budget
            ));
        }
        Ok(cfg)
    }
}

/// Outcome of one seeded execution.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub estimate: UcpiEstimate,
    /// Upper bound on `λ⋆`: `ℓ̂⋆`, or `√ℓ̂⋆(P²)` for non-lazy runs.
    pub bound: f64,
    pub oracle_calls: u64,
    /// Segments extracted under the single-trajectory model.
    pub segments: Option<u64>,
}

fn run_trial(
    spec: &ExperimentSpec,
    chain: &BuiltChain,
    cfg: &UcpiConfig,
    mu: Option<&DiscreteSampler>,
    seed: u64,
) -> Result<TrialOutcome> {
    let counting = CountingOracle::new(chain.oracle());
    let uniform = UniformSampler::new(cfg.state_space_size)?;
    let outcome = match spec.model {
        Model::Rtf if spec.nonlazy => {
            let est = estimate_nonlazy(&counting, &uniform, cfg, seed, spec.workers)?;
            TrialOutcome {
                bound: est.lambda_star_upper,
                estimate: est.squared,
                oracle_calls: counting.calls(),
                segments: None,
            }
        }
        Model::Rtf => {
            let estimate = match mu {
                Some(mu) => {
                    let acc =
                        weighted_collect(&counting, mu, cfg, seed, spec.workers).map_err(|e| e.cause)?;
                    finalize_weighted(&acc, cfg)?
                }
                None => RtfEngine::new(&counting, &uniform, *cfg)
                    .seed(seed)
                    .workers(spec.workers)
                    .estimate()?,
            };
            TrialOutcome {
                bound: estimate.ell_star,
                estimate,
                oracle_calls: counting.calls(),
                segments: None,
            }
        }
        Model::Usp => {
            let engine = UspEngine::new(cfg.state_space_size, cfg.max_path_length, derive_seed(seed, 1));
            let cap = spec.num_paths.unwrap_or(u64::MAX);
            let (acc, stats) = match &spec.usp_path {
                Some(path) => {
                    let file = File::open(path).map_err(|e| {
                        crate::error::CliError::Config(format!(
                            "cannot open trajectory {}: {e}",
                            path.display()
                        ))
                    })?;
                    let source = states_from_reader(BufReader::new(file)).take(spec.budget as usize + 1);
                    usp_collect(&engine, source, cap)?
                }
                None => {
                    let trajectory = OracleTrajectory::new(&counting, 0, spec.budget, path_rng(seed, 0));
                    usp_collect(&engine, trajectory, cap)?
                }
            };
            if stats.segments_emitted == 0 {
                return config(format!(
                    "no segment of length K = {} was completed within {} trajectory steps; \
                     the trajectory never reached its uniform targets in time",
                    cfg.max_path_length, stats.source_steps_consumed
                ));
            }
            let estimate = finalize_estimate(&acc, &cfg.with_num_paths(stats.segments_emitted))?;
            TrialOutcome {
                bound: estimate.ell_star,
                estimate,
                oracle_calls: stats.source_steps_consumed,
                segments: Some(stats.segments_emitted),
            }
        }
    };
    Ok(outcome)
}

/// Runs `spec.trials` seeded executions and compares them with the exact
/// spectrum when the chain is small enough and reversible.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let started = Instant::now();
    let chain = spec.chain.build()?;
    let cfg = spec.resolve(chain.size())?;
    let mu = match &spec.mu_file {
        Some(path) => {
            let file = File::open(path).map_err(|e| {
                crate::error::CliError::Config(format!("cannot open pmf file {}: {e}", path.display()))
            })?;
            let mu = DiscreteSampler::from_reader(BufReader::new(file))?;
            if mu.probabilities().len() != chain.size() {
                return config(format!(
                    "pmf has {} entries but the chain has {} states",
                    mu.probabilities().len(),
                    chain.size()
                ));
            }
            Some(mu)
        }
        None => None,
    };
    let spectrum = chain.spectrum();
    // Without laziness only |λ| is bounded, otherwise the second eigenvalue.
    let target = spectrum.as_ref().map(|s| {
        if spec.nonlazy {
            s.lambda_star()
        } else {
            s.lambda2()
        }
    });

    let mut trials = Vec::with_capacity(spec.trials as usize);
    let mut segments = Vec::new();
    let mut raw_squared = Vec::new();
    for t in 0..spec.trials {
        let seed = derive_seed(spec.seed, t);
        let out = run_trial(spec, &chain, &cfg, mu.as_ref(), seed)?;
        if let Some(s) = out.segments {
            segments.push(s);
        }
        if spec.nonlazy {
            raw_squared.push(out.estimate.ell_star);
        }
        trials.push(TrialSummary {
            trial: t,
            k_argmin: out.estimate.argmin_k,
            ell_star: out.bound,
            t_r_upper: relaxation_upper_bound(out.bound),
            informative: out.bound < 1.0,
            oracle_calls: out.oracle_calls,
            seed,
        });
    }

    let count = trials.len() as f64;
    let informative_frequency = trials.iter().filter(|t| t.informative).count() as f64 / count;
    let coverage_frequency = target.map(|l| trials.iter().filter(|t| t.ell_star >= l).count() as f64 / count);
    Ok(ExperimentReport {
        chain: spec.chain.describe(),
        model: spec.model,
        nonlazy: spec.nonlazy,
        weighted: mu.is_some(),
        budget: spec.budget,
        num_paths: cfg.num_paths,
        max_path_length: cfg.max_path_length,
        confidence: cfg.confidence,
        guaranteed: cfg.is_guaranteed(),
        master_seed: spec.seed,
        exact_lambda2: spectrum.as_ref().map(|s| s.lambda2()),
        exact_lambda_star: spectrum.as_ref().map(|s| s.lambda_star()),
        exact_relaxation_time: spectrum.as_ref().map(|s| s.relaxation_time()),
        oracle_comparison_skipped: spectrum.is_none(),
        informative_frequency,
        coverage_frequency,
        raw_squared_ell_star: raw_squared,
        usp_segments: segments,
        elapsed_seconds: spec.record_timing.then(|| started.elapsed().as_secs_f64()),
        trials,
    })
}
