use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "COVERTLINK_THREADS";

/// Worker count from `COVERTLINK_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Maps `f` over `items` on the worker pool. Output order matches input
/// order whatever the completion order, so reductions over the result are
/// deterministic.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let run = || items.par_iter().map(&f).collect::<Result<Vec<R>>>();
    match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("{THREADS_ENV}: {e}")))?
            .install(run),
        None => run(),
    }
}
