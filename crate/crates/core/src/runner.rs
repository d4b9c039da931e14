//! Fan-out of cycle simulations over a worker pool.
//!
//! Cycle `i` of a batch always uses `cycle_stream(seed, domain, i)`, and
//! results are collected in index order, so output is independent of the
//! worker count.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;

use crate::engine::{simulate_cycle_with, CycleRecord, EngineOptions};
use crate::error::{Error, Result};
use crate::measure::SamplingPolicy;
use crate::model::ModelParams;
use crate::rng::cycle_stream;

#[derive(Clone)]
pub struct Runner {
    seed: u64,
    options: EngineOptions,
    pool: Arc<rayon::ThreadPool>,
    workers: usize,
}

impl std::fmt::Debug for Runner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runner")
            .field("seed", &self.seed)
            .field("workers", &self.workers)
            .field("options", &self.options)
            .finish()
    }
}

impl Runner {
    pub fn new(seed: u64, workers: usize) -> Result<Self> {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Self {
            seed,
            options: EngineOptions::default(),
            pool: Arc::new(pool),
            workers,
        })
    }

    pub fn with_options(mut self, options: EngineOptions) -> Self {
        self.options = options;
        self
    }

    /// Same pool, different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    /// Simulates cycles `range` in `domain` and maps each record through `f`.
    pub fn map_cycles<T, F>(
        &self,
        params: &ModelParams,
        policy: &SamplingPolicy,
        domain: u64,
        range: Range<u64>,
        f: F,
    ) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(CycleRecord) -> T + Sync + Send,
    {
        let seed = self.seed;
        let opts = self.options;
        let run = |i: u64| -> Result<T> {
            let mut rng = cycle_stream(seed, domain, i);
            simulate_cycle_with(params, policy, &mut rng, &opts).map(&f)
        };
        if self.workers == 1 {
            return range.map(run).collect();
        }
        self.pool
            .install(|| range.into_par_iter().map(run).collect::<Result<Vec<T>>>())
    }

    pub fn cycles(
        &self,
        params: &ModelParams,
        policy: &SamplingPolicy,
        domain: u64,
        count: usize,
    ) -> Result<Vec<CycleRecord>> {
        self.map_cycles(params, policy, domain, 0..count as u64, |c| c)
    }

    /// Runs `f` over `items` on the pool, preserving order.
    pub fn par_map<I, T, F>(&self, items: Vec<I>, f: F) -> Vec<T>
    where
        I: Send,
        T: Send,
        F: Fn(I) -> T + Sync + Send,
    {
        if self.workers == 1 {
            return items.into_iter().map(f).collect();
        }
        self.pool.install(|| items.into_par_iter().map(f).collect())
    }
}
