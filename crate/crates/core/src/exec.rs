//! Data-parallel helpers with a sequential fallback.
//!
//! Every batch loop in the crate (policy-pair enumeration, diagnostic suites,
//! seed repetitions, large per-state stage solves) goes through [`map_indices`].
//! With the `parallel` feature (on by default) the work is spread over the rayon
//! pool; without it the same closure runs in index order. Results are always
//! returned in index order, so outputs never depend on the schedule.

/// Below this many items the per-task overhead of the thread pool dominates.
pub const DEFAULT_GRAIN: usize = 32;

/// Map `f` over `0..n`, in parallel when the `parallel` feature is enabled and
/// `n` is at least [`DEFAULT_GRAIN`].
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indices_with_grain(n, DEFAULT_GRAIN, f)
}

/// Like [`map_indices`] with an explicit sequential cutoff.
pub fn map_indices_with_grain<T, F>(n: usize, grain: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if n < grain.max(1) {
        return map_indices_sequential(n, f);
    }
    #[cfg(feature = "parallel")]
    {
        map_indices_parallel(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indices_sequential(n, f)
    }
}

pub fn map_indices_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indices_parallel<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
