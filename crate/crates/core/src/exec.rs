//! Trial execution strategy.
//!
//! Experiments describe work as a pure function of the trial index and hand
//! it to an executor. Results always come back in trial order, so reductions
//! over them are independent of how the trials were scheduled.

use alloc::vec::Vec;

pub trait TrialExecutor {
    fn map_trials<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs every trial on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl TrialExecutor for Serial {
    fn map_trials<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
