//! Data-parallel helpers with a sequential fallback.
//!
//! Every batch operation in the crate goes through [`Exec`]. With the
//! `parallel` feature (on by default) `Exec::Parallel` fans work out over the
//! current rayon pool; without it, both modes run the same sequential loop.
//! Results are always returned in input order, so output never depends on
//! the schedule.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Serial,
    #[default]
    Parallel,
}

impl Exec {
    /// True when this mode will actually use worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Like [`Exec::map`] but stops at the first error (by input order).
    pub fn try_map<T, R, E, F>(self, items: &[T], f: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        // Collecting into Result in parallel may surface a later error first;
        // collect everything, then scan in order.
        self.map(items, f).into_iter().collect()
    }

    /// Map then reduce with an associative `merge`. The reduction order is
    /// fixed (left fold over input order) regardless of mode.
    pub fn map_reduce<T, A, F, M>(self, items: &[T], init: A, f: F, merge: M) -> A
    where
        T: Sync,
        A: Send,
        F: Fn(&T) -> A + Sync + Send,
        M: Fn(A, A) -> A,
    {
        self.map(items, f).into_iter().fold(init, merge)
    }
}
