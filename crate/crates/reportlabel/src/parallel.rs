//! Thread-parallel replicate and translation execution.
//!
//! Replicate `r` always draws from the same random stream, so results do
//! not depend on the worker count or scheduling.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use reportlabel_core::augment::{Backtranslate, TranslationError};
use reportlabel_core::eval::ReplicateRunner;

/// Rayon-backed runner; `None` threads uses the global pool.
#[derive(Debug)]
pub struct Parallel {
    pool: Option<ThreadPool>,
}

impl Parallel {
    pub fn new(threads: Option<usize>) -> Self {
        let pool = threads.map(|n| ThreadPoolBuilder::new().num_threads(n.max(1)).build().expect("thread pool"));
        Parallel { pool }
    }
}

impl Default for Parallel {
    fn default() -> Self {
        Parallel::new(None)
    }
}

impl ReplicateRunner for Parallel {
    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let go = || (0..n).into_par_iter().map(&f).collect();
        match &self.pool {
            Some(pool) => pool.install(go),
            None => go(),
        }
    }
}

/// Splits a batch into one contiguous chunk per worker and hands each chunk
/// to the inner client's batch call; output order matches input order.
pub struct ParallelTranslator<C> {
    inner: C,
    pool: ThreadPool,
}

pub const DEFAULT_TRANSLATION_WORKERS: usize = 4;

impl<C: Backtranslate + Sync> ParallelTranslator<C> {
    pub fn new(inner: C, workers: usize) -> Self {
        let pool = ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool");
        ParallelTranslator { inner, pool }
    }
}

impl<C: Backtranslate + Sync> Backtranslate for ParallelTranslator<C> {
    fn backtranslate(&self, text: &str) -> Result<String, TranslationError> {
        self.inner.backtranslate(text)
    }

    fn backtranslate_batch(&self, texts: &[&str]) -> Vec<Result<String, TranslationError>> {
        if texts.is_empty() {
            return Vec::new();
        }
        let chunk = texts.len().div_ceil(self.pool.current_num_threads());
        let parts: Vec<Vec<Result<String, TranslationError>>> = self.pool.install(|| {
            texts
                .par_chunks(chunk)
                .map(|part| {
                    let out = self.inner.backtranslate_batch(part);
                    if out.len() == part.len() {
                        out
                    } else {
                        let err = TranslationError::Count {
                            expected: part.len(),
                            got: out.len(),
                        };
                        vec![Err(err); part.len()]
                    }
                })
                .collect()
        });
        parts.into_iter().flatten().collect()
    }
}
