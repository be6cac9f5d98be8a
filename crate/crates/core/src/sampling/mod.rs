//! Turning a transition oracle (or a recorded trajectory) into return
//! counts.

mod rtf;
mod usp;

use std::ops::Range;

use thiserror::Error;

use crate::error::Error;

pub use rtf::{rtf_collect, RtfEngine};
pub use usp::{states_from_reader, usp_collect, OracleTrajectory, UspEngine, UspStats};

/// A collection that stopped early. `partial` holds every path that
/// completed before the failure and is still a valid (smaller) sample.
#[derive(Debug, Error)]
#[error("collection interrupted: {cause}")]
pub struct Interrupted<A: std::fmt::Debug> {
    pub partial: A,
    #[source]
    pub cause: Error,
}

/// Splits `0..total` into `workers` contiguous ranges of near-equal length.
pub(crate) fn partition(total: u64, workers: usize) -> Vec<Range<u64>> {
    let workers = workers.max(1) as u64;
    let base = total / workers;
    let extra = total % workers;
    let mut start = 0;
    (0..workers)
        .map(|w| {
            let len = base + u64::from(w < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Runs `job` on each range, on scoped threads when `workers > 1`, and
/// returns the results in range order.
pub(crate) fn run_partitioned<T, F>(total: u64, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    let ranges = partition(total, workers);
    if ranges.len() == 1 {
        return vec![job(ranges[0].clone())];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| {
                let job = &job;
                scope.spawn(move || job(r))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampling worker panicked"))
            .collect()
    })
}
