//! Execution policy for the data-parallel loops.
//!
//! With the `parallel` feature, outer loops (trajectories) and inner loops
//! (per-row/per-column transforms) run on rayon. Without it every helper here
//! degrades to a plain sequential iterator. Results are always returned in
//! index order, so output does not depend on the number of workers.

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// One worker; inner loops run on the calling thread.
    Sequential,
    /// `threads == 0` uses the rayon default (one per core).
    #[default]
    Parallel,
    Threads(usize),
}

impl ExecMode {
    pub fn threads(self) -> usize {
        match self {
            ExecMode::Sequential => 1,
            ExecMode::Parallel => 0,
            ExecMode::Threads(n) => n,
        }
    }
}

/// Evaluates `f(0..n)` under `mode` and returns the results in index order.
pub fn map_indexed<R, F>(mode: ExecMode, n: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(mode.threads())
            .build()
            .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
        Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
    }
    #[cfg(not(feature = "parallel"))]
    {
        // built without rayon: the requested worker count is ignored
        let _ = mode;
        Ok((0..n).map(f).collect())
    }
}

/// Applies `f(index, chunk)` to consecutive `chunk_len`-sized chunks.
pub(crate) fn for_each_chunk<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

/// Maps `f` over `0..n` on the current pool, preserving order. Each worker
/// gets its own state (scratch buffers) created by `init`.
pub(crate) fn collect_indexed_with<S, R, I, F>(n: usize, init: I, f: F) -> Vec<R>
where
    R: Send,
    I: Fn() -> S + Send + Sync,
    F: Fn(&mut S, usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map_init(init, f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut state = init();
        (0..n).map(|i| f(&mut state, i)).collect()
    }
}
