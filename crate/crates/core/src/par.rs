//! Thin switch between rayon and plain iterators.
//!
//! Every helper here preserves element order, so results are bit-identical
//! whichever mode runs them. Reductions are never split across threads:
//! callers compute per-row partials in parallel and fold them sequentially.

/// How data-parallel loops are executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise
    /// falls back to sequential execution.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `out[i] = f(i)` for every index.
pub fn fill_indexed<F>(exec: Execution, out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
        return;
    }
    let _ = exec;
    for (i, v) in out.iter_mut().enumerate() {
        *v = f(i);
    }
}

/// Applies `f(row_index, row)` to consecutive chunks of length `width`.
pub fn for_each_row<F>(exec: Execution, data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(j, row)| f(j, row));
        return;
    }
    let _ = exec;
    for (j, row) in data.chunks_mut(width).enumerate() {
        f(j, row);
    }
}

/// Maps `f` over `items`, returning results in input order.
pub fn map_collect<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Sum of `f(j)` for `j in 0..rows`, with each term computed independently
/// and the sum folded in index order.
pub fn row_sum<F>(exec: Execution, rows: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let mut partial = vec![0.0; rows];
    fill_indexed(exec, &mut partial, f);
    partial.iter().sum()
}

/// Maximum of `f(j)` for `j in 0..rows` (0 for an empty range).
pub fn row_max<F>(exec: Execution, rows: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let mut partial = vec![0.0; rows];
    fill_indexed(exec, &mut partial, f);
    partial.iter().copied().fold(0.0, f64::max)
}
