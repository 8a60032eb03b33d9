//! Execution strategy for the data-parallel inner loops.
//!
//! With the `parallel` feature (default) the hot loops fan out over rayon;
//! without it the same loops run sequentially. Both paths produce identical
//! results: each item is computed independently and reductions happen in a
//! fixed index order afterwards, so the outcome does not depend on the
//! schedule or the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which execution path the solvers take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecStrategy {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecStrategy {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        ExecStrategy::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        ExecStrategy::Sequential
    }
}

/// Map `f` over `0..n`, collecting results in index order.
pub(crate) fn maybe_par_map<U, F>(strategy: ExecStrategy, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match strategy {
        ExecStrategy::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecStrategy::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Chunk `0..n` into fixed-size blocks, map each block to a partial result,
/// then fold the blocks sequentially in block order.
///
/// The chunk size is a constant, never derived from the worker count, so the
/// floating-point reduction tree is identical for any number of threads.
pub(crate) fn chunked_fold<U, A, M, F>(
    strategy: ExecStrategy,
    n: usize,
    chunk: usize,
    map_block: M,
    mut fold: F,
    init: A,
) -> A
where
    U: Send,
    M: Fn(std::ops::Range<usize>) -> U + Sync + Send,
    F: FnMut(A, U) -> A,
{
    let ranges: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(chunk.max(1))
        .map(|start| start..(start + chunk).min(n))
        .collect();
    let blocks = match strategy {
        ExecStrategy::Sequential => ranges.into_iter().map(map_block).collect::<Vec<_>>(),
        #[cfg(feature = "parallel")]
        ExecStrategy::Parallel => ranges.into_par_iter().map(map_block).collect::<Vec<_>>(),
    };
    blocks.into_iter().fold(init, |acc, b| fold(acc, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_index_order() {
        let out = maybe_par_map(ExecStrategy::default(), 100, |i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn chunked_fold_matches_sequential_sum() {
        let seq = chunked_fold(
            ExecStrategy::Sequential,
            1000,
            16,
            |r| r.map(|i| (i as f64).sqrt()).sum::<f64>(),
            |a, b| a + b,
            0.0,
        );
        let def = chunked_fold(
            ExecStrategy::default(),
            1000,
            16,
            |r| r.map(|i| (i as f64).sqrt()).sum::<f64>(),
            |a, b| a + b,
            0.0,
        );
        assert_eq!(seq.to_bits(), def.to_bits());
    }
}
