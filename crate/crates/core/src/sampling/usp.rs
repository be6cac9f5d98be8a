//! Regeneration of uniformly started segments from one long trajectory.
//!
//! For each segment a fresh uniform target `U^i` is drawn and the trajectory
//! is scanned until it hits `U^i` strictly after the end of the previous
//! segment, `τ^i = min{t > τ^{i-1} + k : X_t = U^i}` with `τ^0 = -k`. The `k`
//! steps following the hit form segment `i`. By the strong Markov property
//! the segments are i.i.d. paths with a uniform start. Each trajectory
//! element is read exactly once.

use std::io::BufRead;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::TransitionOracle;
use crate::error::{Error, Result};
use crate::estimator::ReturnCountAccumulator;
use crate::rng::PathRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UspEngine {
    pub state_space_size: usize,
    /// `k`, the length of each extracted segment.
    pub segment_length: usize,
    /// Seed of the stream the uniform targets are drawn from.
    pub target_seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UspStats {
    pub segments_emitted: u64,
    /// Transitions read from the source (elements read minus the initial one).
    pub source_steps_consumed: u64,
    /// Average of `τ^i - (τ^{i-1} + k)` over emitted segments.
    pub mean_wait: f64,
    pub max_wait: u64,
    /// The source ran out before the requested number of segments.
    pub source_exhausted: bool,
}

impl UspEngine {
    pub fn new(state_space_size: usize, segment_length: usize, target_seed: u64) -> Self {
        Self {
            state_space_size,
            segment_length,
            target_seed,
        }
    }

    /// Like [`usp_collect`], calling `on_segment(start_state)` for every
    /// emitted segment.
    pub fn collect_observed<I, F>(
        &self,
        source: I,
        num_segments: u64,
        mut on_segment: F,
    ) -> Result<(ReturnCountAccumulator, UspStats)>
    where
        I: IntoIterator<Item = Result<usize>>,
        F: FnMut(usize),
    {
        if self.state_space_size == 0 || self.segment_length == 0 {
            return Err(Error::Config(
                "segment extraction needs a non-empty state space and k >= 1".into(),
            ));
        }
        let size = self.state_space_size;
        let k_max = self.segment_length;
        let mut targets = ChaCha8Rng::seed_from_u64(self.target_seed);
        let mut acc = ReturnCountAccumulator::new(k_max);
        let mut stats = UspStats::default();
        let mut returns = Vec::with_capacity(k_max);
        let mut total_wait = 0u64;

        let mut source = source.into_iter();
        let mut read = |steps: &mut u64| -> Option<Result<usize>> {
            let next = source.next()?;
            *steps += 1;
            Some(next.and_then(|x| {
                if x < size {
                    Ok(x)
                } else {
                    Err(Error::StateOutOfRange { state: x, size })
                }
            }))
        };

        // X_0 is never a regeneration point since τ^1 > τ^0 + k = 0.
        let mut steps = 0u64;
        match read(&mut steps) {
            None => {
                stats.source_exhausted = num_segments > 0;
                return Ok((acc, stats));
            }
            Some(first) => {
                first?;
            }
        }
        let mut segment_end = 0u64;

        'segments: while stats.segments_emitted < num_segments {
            let target = targets.random_range(0..size);
            let hit_time = loop {
                match read(&mut steps) {
                    None => break 'segments,
                    Some(x) => {
                        if x? == target {
                            break steps - 1;
                        }
                    }
                }
            };
            returns.clear();
            for k in 1..=k_max {
                match read(&mut steps) {
                    None => break 'segments,
                    Some(x) => {
                        if x? == target {
                            returns.push(k);
                        }
                    }
                }
            }
            let wait = hit_time - segment_end;
            segment_end = steps - 1;
            total_wait += wait;
            stats.max_wait = stats.max_wait.max(wait);
            stats.segments_emitted += 1;
            acc.record_path(returns.drain(..));
            on_segment(target);
        }

        stats.source_exhausted = stats.segments_emitted < num_segments;
        stats.source_steps_consumed = steps.saturating_sub(1);
        if stats.segments_emitted > 0 {
            stats.mean_wait = total_wait as f64 / stats.segments_emitted as f64;
        }
        Ok((acc, stats))
    }
}

/// Extracts up to `num_segments` uniformly started segments of length
/// `engine.segment_length` from `source`. Running out of source is not an
/// error; the accumulator then holds fewer paths.
pub fn usp_collect<I>(
    engine: &UspEngine,
    source: I,
    num_segments: u64,
) -> Result<(ReturnCountAccumulator, UspStats)>
where
    I: IntoIterator<Item = Result<usize>>,
{
    engine.collect_observed(source, num_segments, |_| {})
}

/// A single trajectory simulated from an oracle: yields the start state,
/// then `transitions` successive states.
pub struct OracleTrajectory<'a, O: ?Sized> {
    oracle: &'a O,
    rng: PathRng,
    state: usize,
    remaining: u64,
    started: bool,
}

impl<'a, O: TransitionOracle + ?Sized> OracleTrajectory<'a, O> {
    pub fn new(oracle: &'a O, start: usize, transitions: u64, rng: PathRng) -> Self {
        Self {
            oracle,
            rng,
            state: start,
            remaining: transitions,
            started: false,
        }
    }
}

impl<O: TransitionOracle + ?Sized> Iterator for OracleTrajectory<'_, O> {
    type Item = Result<usize>;

    fn next(&mut self) -> Option<Self::Item> {
        if !self.started {
            self.started = true;
            return Some(Ok(self.state));
        }
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let rng: &mut dyn RngCore = &mut self.rng;
        Some(match self.oracle.next_state(self.state, rng) {
            Ok(x) => {
                self.state = x;
                Ok(x)
            }
            Err(e) => {
                self.remaining = 0;
                Err(e.into())
            }
        })
    }
}

/// Streams newline-separated 0-based state indices. Blank lines are skipped.
pub fn states_from_reader<R: BufRead>(reader: R) -> impl Iterator<Item = Result<usize>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() {
                None
            } else {
                Some(t.parse::<usize>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("{t:?}: {e}"),
                }))
            }
        }
    })
}
