use gibbsbd_core::ReplicaRunner;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Fans replicas out over a fixed-size worker pool. Results come back in
/// replica order, so reductions do not depend on scheduling.
pub struct RayonRunner {
    pool: ThreadPool,
}

impl RayonRunner {
    /// `jobs = 0` uses one worker per available core.
    pub fn new(jobs: usize) -> anyhow::Result<Self> {
        let pool = ThreadPoolBuilder::new().num_threads(jobs).build()?;
        Ok(RayonRunner { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl ReplicaRunner for RayonRunner {
    fn run<T, F>(&self, count: u64, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(&job).collect())
    }
}
