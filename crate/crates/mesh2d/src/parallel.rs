//! Deterministic parallel helpers.
//!
//! Meshing output must be identical for every thread count, so reductions
//! cannot rely on rayon's scheduling-dependent join tree. Sums are instead
//! taken over fixed-size chunks that are combined in index order; per-item
//! maps write each result into its own slot.

use rayon::prelude::*;

const CHUNK: usize = 1024;

/// Sum `f(i)` over `0..n` with a chunking that does not depend on the number
/// of worker threads.
pub fn det_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if n == 0 {
        return 0.0;
    }
    let chunks: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        })
        .collect();
    chunks.into_iter().sum()
}

/// Map `f` over `0..n` in parallel, collecting results in index order.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Run `f` on a dedicated rayon pool with `threads` workers (0 = rayon's
/// default). Keeps the meshing thread count a per-run setting rather than a
/// process-global one.
pub fn with_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("failed to build thread pool");
    pool.install(f)
}
