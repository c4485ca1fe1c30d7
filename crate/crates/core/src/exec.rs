//! Data-parallel dispatch with a sequential fallback.
//!
//! Every parallel loop in the crate goes through these helpers. Work items
//! are indexed and own their random streams, so the output never depends on
//! whether rayon is enabled or how many threads it runs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether this build can run loops on the rayon pool.
pub const PARALLEL_AVAILABLE: bool = cfg!(feature = "parallel");

/// Apply `f` to every index in `0..count` and collect in index order.
pub fn map_indexed<T, F>(count: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..count).map(f).collect()
}

/// Mutate every element of `items` in place.
pub fn for_each_mut<T, F>(items: &mut [T], parallel: bool, f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
        return;
    }
    let _ = parallel;
    items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
}

/// Sort a float slice ascending (total order).
pub fn sort_f64(values: &mut [f64], parallel: bool) {
    #[cfg(feature = "parallel")]
    if parallel && values.len() > 1 << 15 {
        values.par_sort_unstable_by(f64::total_cmp);
        return;
    }
    let _ = parallel;
    values.sort_unstable_by(f64::total_cmp);
}

/// Configure the global rayon pool. No-op without the `parallel` feature.
pub fn init_threads(threads: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(())
    }
}
