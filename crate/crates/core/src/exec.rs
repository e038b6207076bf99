//! Sequential / data-parallel execution switch.
//!
//! With the `parallel` feature disabled every strategy runs sequentially.

/// How independent work items are evaluated. Results never depend on the
/// choice.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `0..n` and collects in index order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Fallible variant of [`Execution::map_range`]; the first error in index
    /// order is not guaranteed under parallel execution, only that some error
    /// is returned.
    pub fn try_map_range<R, E, F>(self, n: usize, f: F) -> Result<Vec<R>, E>
    where
        R: Send,
        E: Send,
        F: Fn(usize) -> Result<R, E> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Runs `f` inside a pool bounded to `jobs` threads when parallel.
    pub fn with_jobs<R: Send>(self, jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if let (true, Some(jobs)) = (self.is_parallel(), jobs) {
            match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                Ok(pool) => return pool.install(f),
                Err(e) => log::warn!("could not build a {jobs}-thread pool: {e}"),
            }
        }
        let _ = jobs;
        f()
    }
}
