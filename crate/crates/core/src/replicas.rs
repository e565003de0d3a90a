//! Replica orchestration. Each replica `i` draws from the stream
//! `(seed, i)`, so results depend only on the index, never on scheduling.

use alloc::vec::Vec;

/// Runs `count` independent replicas and returns their results ordered by
/// replica index.
pub trait ReplicaRunner {
    fn run<T, F>(&self, count: u64, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs replicas one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl ReplicaRunner for Sequential {
    fn run<T, F>(&self, count: u64, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..count).map(job).collect()
    }
}
