//! Optional data parallelism.
//!
//! With the `parallel` feature the helpers below dispatch to rayon; without it
//! they run sequentially. Parallel execution can also be switched off at run
//! time with [`set_parallel`], which the benches use to compare both paths in a
//! single build. All reductions used by callers are commutative and
//! associative, so results never depend on the execution mode.

use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};

static ENABLED: AtomicBool = AtomicBool::new(true);

/// Enables or disables parallel execution at run time. Has no effect when the
/// crate is built without the `parallel` feature.
pub fn set_parallel(on: bool) {
    ENABLED.store(on, Ordering::Relaxed);
}

/// Whether the helpers currently run in parallel.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && ENABLED.load(Ordering::Relaxed)
}

/// Caps the number of worker threads of the global pool. Must be called before
/// the first parallel operation; later calls are ignored.
pub fn init_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Maps every index of `range` and folds the results with `reduce`.
pub fn map_reduce<R, M, F>(range: Range<usize>, identity: R, map: M, reduce: F) -> R
where
    R: Send + Sync + Clone,
    M: Fn(usize) -> R + Sync + Send,
    F: Fn(R, R) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return range
            .into_par_iter()
            .map(map)
            .reduce(|| identity.clone(), &reduce);
    }
    range.map(map).fold(identity, reduce)
}

/// Sums `map(i)` over the range.
pub fn sum_u64<M>(range: Range<usize>, map: M) -> u64
where
    M: Fn(usize) -> u64 + Sync + Send,
{
    map_reduce(range, 0u64, map, |a, b| a + b)
}

/// Maps every index in order, collecting the outputs.
pub fn map_collect<R, M>(range: Range<usize>, map: M) -> Vec<R>
where
    R: Send,
    M: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return range.into_par_iter().map(map).collect();
    }
    range.map(map).collect()
}

/// Applies `f` to every element (with its index) of a mutable slice.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
        return;
    }
    items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
}

/// First index (smallest) for which `pred` holds, if any.
pub fn find_first<P>(range: Range<usize>, pred: P) -> Option<usize>
where
    P: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return range.into_par_iter().find_first(|&i| pred(i));
    }
    range.into_iter().find(|&i| pred(i))
}
