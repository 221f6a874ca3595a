//! Data-parallel loop helpers with a sequential fallback.
//!
//! Every Monte Carlo loop in this crate is expressed as an indexed map so
//! results depend only on the item index, never on scheduling. With the
//! `parallel` feature (default) the maps run on the current rayon pool;
//! without it they run sequentially. `map_collect_seq` is always available
//! so benchmarks can compare both paths in one binary.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_collect_seq(n, f)
}

/// Sequential twin of [`map_collect`].
pub fn map_collect_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let par: Vec<usize> = map_collect(100, |i| i * i);
        let seq: Vec<usize> = map_collect_seq(100, |i| i * i);
        assert_eq!(par, seq);
    }
}
