//! Minimal scoped-thread helper for row-parallel assembly.

use std::sync::atomic::{AtomicUsize, Ordering};

static THREADS: AtomicUsize = AtomicUsize::new(0);

/// Caps the number of worker threads (0 = available parallelism).
pub fn set_threads(k: usize) {
    THREADS.store(k, Ordering::Relaxed);
}

pub fn threads() -> usize {
    match THREADS.load(Ordering::Relaxed) {
        0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        k => k,
    }
}

/// Computes `f(i)` for `i in 0..n`, splitting the index range into
/// contiguous chunks over the worker threads. Output order is fixed.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let k = threads().min(n.max(1));
    if k <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(k);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..k)
            .map(|c| {
                let lo = c * chunk;
                let hi = ((c + 1) * chunk).min(n);
                scope.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}
