//! Data-parallel loop helpers.
//!
//! With the `parallel` feature the loops run on the rayon pool, otherwise
//! they run sequentially. Work is always split into the same fixed chunks
//! and partial reductions are combined in chunk order, so both builds give
//! bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(chunk_index, chunk)` for each consecutive `chunk`-sized slice.
pub fn for_each_chunk<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Like [`for_each_chunk`] but walks two buffers with matching chunk counts.
pub fn for_each_chunk_zip<T, U, F>(a: &mut [T], ca: usize, b: &mut [U], cb: usize, f: F)
where
    T: Send,
    U: Send,
    F: Fn(usize, &mut [T], &mut [U]) + Sync + Send,
{
    assert!(ca > 0 && cb > 0);
    assert_eq!(a.len() / ca, b.len() / cb);
    #[cfg(feature = "parallel")]
    a.par_chunks_mut(ca)
        .zip(b.par_chunks_mut(cb))
        .enumerate()
        .for_each(|(i, (x, y))| f(i, x, y));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(ca)
        .zip(b.chunks_mut(cb))
        .enumerate()
        .for_each(|(i, (x, y))| f(i, x, y));
}

/// Evaluates `f` on `0..n` and returns the results in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Block size used by the deterministic reductions.
pub const REDUCE_BLOCK: usize = 64;

/// Sums `f(i)` over `0..n` with a fixed blocking, independent of thread count.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(REDUCE_BLOCK);
    let partial = map_range(blocks, |b| {
        let lo = b * REDUCE_BLOCK;
        let hi = (lo + REDUCE_BLOCK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    });
    partial.iter().sum()
}

/// Vector-valued version of [`sum_range`]: sums `K` accumulators at once.
pub fn sum_range_k<const K: usize, F>(n: usize, f: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync + Send,
{
    let blocks = n.div_ceil(REDUCE_BLOCK);
    let partial = map_range(blocks, |b| {
        let lo = b * REDUCE_BLOCK;
        let hi = (lo + REDUCE_BLOCK).min(n);
        let mut s = [0.0; K];
        for i in lo..hi {
            let v = f(i);
            for k in 0..K {
                s[k] += v[k];
            }
        }
        s
    });
    let mut out = [0.0; K];
    for p in &partial {
        for k in 0..K {
            out[k] += p[k];
        }
    }
    out
}

/// Number of worker threads the current build will use.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
