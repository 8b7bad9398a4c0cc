//! Keyed random streams and deterministic sharded Monte Carlo.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` keyed by
//! `(seed, stream)`. Sharded runs split `samples` into fixed-size shards,
//! each with its own stream, and hand back per-shard results in shard order.
//! The shard layout does not depend on the worker count, so a run is
//! bit-identical for any number of workers.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Paths per shard. Fixed so results never depend on the thread count.
pub const SHARD_SIZE: u64 = 1 << 16;

pub type StreamRng = ChaCha8Rng;

/// Stream for `(seed, stream_id)`.
pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Settings shared by every sharded estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
}

impl MonteCarlo {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn shards(&self) -> u64 {
        self.samples.div_ceil(SHARD_SIZE)
    }

    /// Run `body(rng, paths)` once per shard and return the shard results in
    /// shard order. `domain` separates the stream ids of unrelated
    /// experiments that share a seed.
    pub fn run<T, F>(&self, domain: u32, body: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut StreamRng, u64) -> T + Sync,
    {
        let shards = self.shards();
        let job = |i: u64| {
            let paths = SHARD_SIZE.min(self.samples - i * SHARD_SIZE);
            let mut rng = stream(self.seed, (u64::from(domain) << 40) | i);
            body(&mut rng, paths)
        };
        if self.workers <= 1 || shards <= 1 {
            return (0..shards).map(job).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
            Ok(pool) => pool.install(|| (0..shards).into_par_iter().map(job).collect()),
            Err(_) => (0..shards).map(job).collect(),
        }
    }
}
