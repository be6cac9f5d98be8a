use std::ops::Range;

use super::{run_partitioned, Interrupted};
use crate::chain::{InitialSampler, TransitionOracle};
use crate::error::{Error, OracleError, Result};
use crate::estimator::{finalize_estimate, ReturnCountAccumulator, UcpiConfig, UcpiEstimate};
use crate::rng::path_rng;

/// Collects `I` independent paths of length `K` from fresh starts.
///
/// Path `j` draws all of its randomness from stream `(master_seed, j)`, so the
/// counts do not depend on `worker_count`.
#[derive(Debug, Clone, Copy)]
pub struct RtfEngine<'a, O: ?Sized, S: ?Sized> {
    pub oracle: &'a O,
    pub initial: &'a S,
    pub config: UcpiConfig,
    pub worker_count: usize,
    pub master_seed: u64,
}

impl<'a, O, S> RtfEngine<'a, O, S>
where
    O: TransitionOracle + ?Sized,
    S: InitialSampler + ?Sized,
{
    pub fn new(oracle: &'a O, initial: &'a S, config: UcpiConfig) -> Self {
        Self {
            oracle,
            initial,
            config,
            worker_count: 1,
            master_seed: 0,
        }
    }

    pub fn workers(mut self, worker_count: usize) -> Self {
        self.worker_count = worker_count.max(1);
        self
    }

    pub fn seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn collect(&self) -> Result<ReturnCountAccumulator, Interrupted<ReturnCountAccumulator>> {
        rtf_collect(self)
    }

    /// Collects and finalizes. On failure the partial counts are dropped;
    /// use [`collect`](Self::collect) to keep them.
    pub fn estimate(&self) -> Result<UcpiEstimate> {
        let acc = self.collect().map_err(|e| e.cause)?;
        finalize_estimate(&acc, &self.config)
    }

    fn check(&self) -> Result<()> {
        self.config.validate()?;
        let n = self.config.state_space_size;
        if self.oracle.state_space_size() != n || self.initial.state_space_size() != n {
            return Err(Error::Config(format!(
                "state space sizes disagree: config {n}, oracle {}, sampler {}",
                self.oracle.state_space_size(),
                self.initial.state_space_size()
            )));
        }
        Ok(())
    }

    fn run_range(&self, paths: Range<u64>) -> (ReturnCountAccumulator, Option<OracleError>) {
        let k_max = self.config.max_path_length;
        let n = self.config.state_space_size;
        let mut acc = ReturnCountAccumulator::new(k_max);
        let mut returns = Vec::with_capacity(k_max);
        for j in paths {
            let mut rng = path_rng(self.master_seed, j);
            let start = self.initial.sample(&mut rng);
            let mut x = start;
            returns.clear();
            for k in 1..=k_max {
                x = match self.oracle.next_state(x, &mut rng) {
                    Ok(y) if y < n => y,
                    Ok(y) => return (acc, Some(OracleError(format!("returned state {y} >= {n}")))),
                    Err(e) => return (acc, Some(e)),
                };
                if x == start {
                    returns.push(k);
                }
            }
            acc.record_path(returns.drain(..));
        }
        (acc, None)
    }
}

pub fn rtf_collect<O, S>(
    engine: &RtfEngine<'_, O, S>,
) -> Result<ReturnCountAccumulator, Interrupted<ReturnCountAccumulator>>
where
    O: TransitionOracle + ?Sized,
    S: InitialSampler + ?Sized,
{
    let k_max = engine.config.max_path_length;
    if let Err(cause) = engine.check() {
        return Err(Interrupted {
            partial: ReturnCountAccumulator::new(k_max),
            cause,
        });
    }
    let parts = run_partitioned(engine.config.num_paths, engine.worker_count, |r| {
        engine.run_range(r)
    });
    let mut total = ReturnCountAccumulator::new(k_max);
    let mut failure = None;
    for (acc, err) in parts {
        total.merge(&acc).expect("worker accumulators share K");
        if failure.is_none() {
            failure = err;
        }
    }
    match failure {
        None => Ok(total),
        Some(e) => Err(Interrupted {
            partial: total,
            cause: e.into(),
        }),
    }
}
