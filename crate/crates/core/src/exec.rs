//! Data-parallel execution with a sequential fallback.
//!
//! Work is always split into indexed units (replicates or sample blocks) and
//! results come back in index order, so a reduction over the returned vector
//! is identical whichever path ran it.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise runs
    /// sequentially.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

/// Sets the size of the global worker pool. Only the first call has an
/// effect; without the `parallel` feature this is a no-op.
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

/// Splits `total` items into blocks of `block` and returns `(start, len)` of
/// block `index`.
pub(crate) fn block_range(total: usize, block: usize, index: usize) -> (usize, usize) {
    let start = index * block;
    (start, block.min(total - start))
}

pub(crate) fn block_count(total: usize, block: usize) -> usize {
    total.div_ceil(block)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_return_in_order() {
        let seq = Execution::Sequential.map_indexed(1000, |i| i * i);
        let par = Execution::Parallel.map_indexed(1000, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[31], 961);
    }

    #[test]
    fn blocks_cover_total() {
        let total = 10_001;
        let n = block_count(total, 1000);
        assert_eq!(n, 11);
        let covered: usize = (0..n).map(|i| block_range(total, 1000, i).1).sum();
        assert_eq!(covered, total);
        assert_eq!(block_range(total, 1000, 10), (10_000, 1));
    }
}
