//! Fixed-shape pairwise summation.
//!
//! The reduction tree depends only on the length of the input, never on how
//! many threads did the work, so every result is bit-reproducible.

use rayon::prelude::*;
use std::ops::Add;

const LEAF: usize = 32;
const CHUNK: usize = 4096;

pub fn pairwise_sum<T>(xs: &[T]) -> T
where
    T: Copy + Add<Output = T> + Default,
{
    pairwise_sum_by(xs.len(), |i| xs[i])
}

/// Pairwise sum of `f(0) + ... + f(n-1)` without materializing the terms.
pub fn pairwise_sum_by<T, F>(n: usize, f: F) -> T
where
    T: Copy + Add<Output = T> + Default,
    F: Fn(usize) -> T,
{
    fn rec<T, F>(lo: usize, hi: usize, f: &F) -> T
    where
        T: Copy + Add<Output = T> + Default,
        F: Fn(usize) -> T,
    {
        if hi - lo <= LEAF {
            let mut acc = T::default();
            for i in lo..hi {
                acc = acc + f(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    if n == 0 {
        return T::default();
    }
    rec(0, n, &f)
}

/// Parallel version of [`pairwise_sum_by`]. Terms are grouped into fixed
/// chunks whose partial sums are combined pairwise, so the result does not
/// depend on the size of the thread pool.
pub fn par_sum_by<T, F>(n: usize, f: F) -> T
where
    T: Copy + Add<Output = T> + Default + Send + Sync,
    F: Fn(usize) -> T + Sync,
{
    if n <= CHUNK {
        return pairwise_sum_by(n, f);
    }
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            pairwise_sum_by(hi - lo, |i| f(lo + i))
        })
        .collect();
    pairwise_sum(&partial)
}
