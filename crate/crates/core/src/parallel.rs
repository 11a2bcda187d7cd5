use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Runs independent jobs on a fixed number of workers. Results always come
/// back in input order, so outcomes do not depend on the worker count.
pub struct Executor {
    pool: Option<ThreadPool>,
}

impl Executor {
    /// `workers <= 1` runs everything on the calling thread.
    pub fn new(workers: usize) -> Self {
        let pool = (workers > 1).then(|| {
            ThreadPoolBuilder::new().num_threads(workers).build().expect("failed to start worker threads")
        });
        Self { pool }
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync,
    {
        match &self.pool {
            None => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            Some(pool) => pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()),
        }
    }
}
