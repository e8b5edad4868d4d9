//! Data-parallel helpers. With the `parallel` feature these fan out over the
//! rayon pool; without it they run the same closures sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `f(0), …, f(n−1)` in index order.
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

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Folds `f(0), …, f(n−1)` with an associative, commutative `combine`.
pub fn map_reduce<R, F, C>(n: usize, identity: R, f: F, combine: C) -> R
where
    R: Send + Sync + Clone,
    F: Fn(usize) -> R + Sync + Send,
    C: Fn(R, R) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| identity.clone(), &combine)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(identity, combine)
    }
}

/// Sequential twin of [`map_reduce`], always available for comparison.
pub fn map_reduce_seq<R, F, C>(n: usize, identity: R, f: F, combine: C) -> R
where
    F: Fn(usize) -> R,
    C: Fn(R, R) -> R,
{
    (0..n).map(f).fold(identity, combine)
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
