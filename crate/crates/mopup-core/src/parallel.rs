//! Per-sample reductions. The parallel path chunks the index range with a
//! fixed chunk size and reduces chunk sums in index order, so the result does
//! not depend on thread count or scheduling; deterministic mode forces a
//! strict left-to-right sequential accumulation instead.

use crate::linalg::Matrix;

#[cfg(feature = "parallel")]
const CHUNK: usize = 32;

/// Sum of `f(0) + f(1) + ... + f(n-1)` where every term is a `rows x cols`
/// matrix.
pub fn sum_terms<F>(n: usize, rows: usize, cols: usize, deterministic: bool, f: F) -> Matrix
where
    F: Fn(usize) -> Matrix + Sync,
{
    #[cfg(feature = "parallel")]
    if !deterministic && n > CHUNK {
        use rayon::prelude::*;
        let chunk_sums: Vec<Matrix> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(n);
                let mut acc = Matrix::zeros(rows, cols);
                for i in lo..hi {
                    acc += f(i);
                }
                acc
            })
            .collect();
        let mut acc = Matrix::zeros(rows, cols);
        for s in chunk_sums {
            acc += s;
        }
        return acc;
    }
    let _ = deterministic;
    let mut acc = Matrix::zeros(rows, cols);
    for i in 0..n {
        acc += f(i);
    }
    acc
}

/// Scalar analogue of [`sum_terms`].
pub fn sum_scalars<F>(n: usize, deterministic: bool, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    #[cfg(feature = "parallel")]
    if !deterministic && n > CHUNK {
        use rayon::prelude::*;
        let chunk_sums: Vec<f64> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(n);
                (lo..hi).map(&f).sum()
            })
            .collect();
        return chunk_sums.into_iter().sum();
    }
    let _ = deterministic;
    (0..n).map(f).sum()
}
