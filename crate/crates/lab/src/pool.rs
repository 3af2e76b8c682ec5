//! Rayon-backed trial executor.

use rayon::prelude::*;
use rmt_lab_core::exec::TrialExecutor;

/// Environment variable overriding the automatic worker count.
pub const WORKERS_ENV: &str = "RMT_LAB_WORKERS";

/// Worker count: command-line flag, then `RMT_LAB_WORKERS`, then the config
/// file, then the number of CPUs the process may use. Zero means "not set"
/// at every level.
pub fn resolve_workers(flag: Option<usize>, config: usize) -> usize {
    let env = std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok());
    flag.filter(|w| *w > 0)
        .or(env.filter(|w| *w > 0))
        .or(Some(config).filter(|w| *w > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

pub struct Pool {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(Self { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}

impl TrialExecutor for Pool {
    fn map_trials<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        if self.workers == 1 {
            return (0..count).map(f).collect();
        }
        self.pool.install(|| (0..count).into_par_iter().map(&f).collect())
    }
}
