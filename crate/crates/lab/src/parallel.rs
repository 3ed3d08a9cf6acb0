//! Worker pool. Jobs are indexed and results come back in index order, so the
//! worker count never changes what is computed.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{LabError, Result};

/// Jobs handed to a worker at once by [`Pool::fold_chunks`].
pub const CHUNK: usize = 256;

pub struct Pool {
    pool: ThreadPool,
}

impl Pool {
    /// `None` means one worker per available core.
    pub fn new(workers: Option<usize>) -> Result<Self> {
        let mut builder = ThreadPoolBuilder::new();
        if let Some(n) = workers {
            builder = builder.num_threads(n.max(1));
        }
        let pool = builder.build().map_err(|e| LabError::Pool(e.to_string()))?;
        Ok(Pool { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `[f(0), f(1), ..., f(n - 1)]`.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }

    /// Like [`Pool::map`] but stops at the first error (by index).
    pub fn try_map<T, E, F>(&self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync,
    {
        self.map(n, f).into_iter().collect()
    }

    /// Computes jobs `0..n` in parallel blocks and feeds them to `sink` in
    /// index order, holding at most one block of results at a time.
    pub fn fold_chunks<T, E, F, S>(&self, n: usize, f: F, mut sink: S) -> Result<(), E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync,
        S: FnMut(T),
    {
        let block = CHUNK * self.workers();
        let mut start = 0;
        while start < n {
            let end = (start + block).min(n);
            let results: Vec<Result<T, E>> = self.pool.install(|| (start..end).into_par_iter().map(&f).collect());
            for r in results {
                sink(r?);
            }
            start = end;
        }
        Ok(())
    }
}
