//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the loops below run on the rayon
//! pool; without it, or when the current pool has a single thread, they are
//! plain iterator loops. Every helper distributes independent work items
//! only. No reduction is ever split across threads, so results are
//! bit-identical whichever path runs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// True when work should be handed to rayon.
#[cfg(feature = "parallel")]
fn pooled() -> bool {
    rayon::current_num_threads() > 1
}

/// Applies `f(row_index, row)` to each `row_len`-sized chunk of `data`.
///
/// `init` builds per-worker scratch state (FFT buffers and the like).
pub fn rows_mut_init<T, S, I, F>(data: &mut [T], row_len: usize, init: I, f: F)
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if pooled() {
        data.par_chunks_mut(row_len)
            .enumerate()
            .with_min_len(8)
            .for_each_init(init, |s, (j, row)| f(s, j, row));
        return;
    }
    {
        let mut s = init();
        for (j, row) in data.chunks_mut(row_len).enumerate() {
            f(&mut s, j, row);
        }
    }
}

/// Applies `f(index, item)` to every element of `items`.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if pooled() {
        items
            .par_iter_mut()
            .enumerate()
            .with_min_len(4)
            .for_each(|(i, t)| f(i, t));
        return;
    }
    {
        for (i, t) in items.iter_mut().enumerate() {
            f(i, t);
        }
    }
}

/// Evaluates `f` on `0..count` and collects the results in index order.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if pooled() {
        return (0..count).into_par_iter().map(f).collect();
    }
    (0..count).map(f).collect()
}

/// Runs `f` inside a pool bounded to `threads` workers when the parallel
/// backend is enabled; otherwise calls `f` directly.
pub fn with_thread_limit<T, F>(threads: Option<usize>, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads.filter(|&n| n > 0) {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Whether the rayon backend is compiled in.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Walks two slices in lockstep chunks of `chunk` elements and applies
/// `f(chunk_index, a_chunk, b_chunk)`. The final chunks may be shorter.
pub fn paired_chunks_mut<F>(a: &mut [f64], b: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if pooled() {
        a.par_chunks_mut(chunk)
            .zip(b.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(c, (x, y))| f(c, x, y));
        return;
    }
    {
        for (c, (x, y)) in a.chunks_mut(chunk).zip(b.chunks_mut(chunk)).enumerate() {
            f(c, x, y);
        }
    }
}
