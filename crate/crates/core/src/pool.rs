//! Data-parallel map over independent jobs.
//!
//! With the `parallel` feature (default) jobs run on a dedicated rayon pool
//! sized to the requested parallelism. Without it, or at parallelism 1, jobs
//! run sequentially on the calling thread. Results always come back in input
//! order.

#[cfg(feature = "parallel")]
use std::sync::Arc;

#[derive(Clone)]
pub struct WorkerPool {
    parallelism: usize,
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool")
            .field("parallelism", &self.parallelism)
            .field("parallel", &self.is_parallel())
            .finish()
    }
}

impl WorkerPool {
    /// A parallelism of 0 is treated as 1.
    pub fn new(parallelism: usize) -> Self {
        let parallelism = parallelism.max(1);
        #[cfg(feature = "parallel")]
        {
            let pool = (parallelism > 1).then(|| {
                Arc::new(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(parallelism)
                        .thread_name(|i| format!("satevo-worker-{i}"))
                        .build()
                        .expect("failed to start worker pool"),
                )
            });
            WorkerPool { parallelism, pool }
        }
        #[cfg(not(feature = "parallel"))]
        WorkerPool { parallelism }
    }

    pub fn sequential() -> Self {
        WorkerPool::new(1)
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }
}

impl Default for WorkerPool {
    fn default() -> Self {
        WorkerPool::sequential()
    }
}
