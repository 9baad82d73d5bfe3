//! Execution strategy for the per-pixel and per-scene kernels.
//!
//! With the `parallel` feature (on by default) kernels fan out over rayon's
//! global pool; without it every path runs on the calling thread. Callers can
//! also force the sequential path at runtime, which the benches use to compare
//! both.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// True when work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Fill `out` row by row; `f(row_index, row)` writes one row of `width` items.
pub(crate) fn for_each_row<T, F>(exec: Exec, out: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| f(y, row));
        return;
    }
    let _ = exec;
    out.chunks_mut(width).enumerate().for_each(|(y, row)| f(y, row));
}

/// Map `items` to a new vector, preserving order.
pub(crate) fn map_vec<I, O, F>(exec: Exec, items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}
