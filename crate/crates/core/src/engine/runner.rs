//! Trial fan-out. Each trial owns its generator, so the parallel and
//! sequential paths return identical results in identical order.

use crate::Result;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_trials_sequential<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..count).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_trials_parallel<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Runs `f(0..count)` on the thread pool when the `parallel` feature is on.
pub fn map_trials<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_trials_parallel(count, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_trials_sequential(count, f)
    }
}
