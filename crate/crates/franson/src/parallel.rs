//! Execution strategy for the data-parallel kernels.
//!
//! Two kernels dominate runtime: per-pixel field evaluation and per-pair
//! Monte Carlo accumulation. Both are expressed here once, with a rayon
//! implementation (feature `parallel`, on by default) and a sequential
//! fallback. The two produce bit-identical output: pixel maps are pure
//! per-index functions, and count accumulation is an integer sum, which is
//! associative and commutative no matter how the work is split.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Order-preserving map of `f` over `0..n`, parallel when enabled.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Sequential variant of [`map_indexed`], kept available under every feature
/// set for the benchmark suite and determinism tests.
pub(crate) fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Explicit rayon variant of [`map_indexed`].
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed_par<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Sum per-batch count contributions into one histogram of `len` bins.
///
/// `fill` is called once per batch index in `0..batches` with a scratch
/// histogram to add into. Batches are merged by element-wise integer
/// addition, so the result does not depend on how batches are scheduled.
pub(crate) fn accumulate_counts<F>(batches: usize, len: usize, fill: F) -> Vec<u32>
where
    F: Fn(usize, &mut [u32]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        accumulate_counts_par(batches, len, fill)
    }
    #[cfg(not(feature = "parallel"))]
    {
        accumulate_counts_seq(batches, len, fill)
    }
}

/// Sequential variant of [`accumulate_counts`].
pub(crate) fn accumulate_counts_seq<F>(batches: usize, len: usize, fill: F) -> Vec<u32>
where
    F: Fn(usize, &mut [u32]),
{
    let mut acc = vec![0u32; len];
    for batch in 0..batches {
        fill(batch, &mut acc);
    }
    acc
}

/// Explicit rayon variant of [`accumulate_counts`].
#[cfg(feature = "parallel")]
pub(crate) fn accumulate_counts_par<F>(batches: usize, len: usize, fill: F) -> Vec<u32>
where
    F: Fn(usize, &mut [u32]) + Sync + Send,
{
    (0..batches)
        .into_par_iter()
        .fold(
            || vec![0u32; len],
            |mut acc, batch| {
                fill(batch, &mut acc);
                acc
            },
        )
        .reduce(
            || vec![0u32; len],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        )
}

/// Sums one integer per batch. Integer addition is associative and
/// commutative, so the total is independent of how rayon partitions the
/// batches.
pub(crate) fn sum_batches<F>(batches: usize, f: F) -> u64
where
    F: Fn(usize) -> u64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        sum_batches_par(batches, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sum_batches_seq(batches, f)
    }
}

/// Sequential variant of [`sum_batches`]. In parallel builds only the
/// determinism tests call this directly.
#[cfg_attr(feature = "parallel", allow(dead_code))]
pub(crate) fn sum_batches_seq<F>(batches: usize, f: F) -> u64
where
    F: Fn(usize) -> u64 + Sync + Send,
{
    (0..batches).map(f).sum()
}

/// Explicit rayon variant of [`sum_batches`].
#[cfg(feature = "parallel")]
pub(crate) fn sum_batches_par<F>(batches: usize, f: F) -> u64
where
    F: Fn(usize) -> u64 + Sync + Send,
{
    (0..batches).into_par_iter().map(f).sum()
}
