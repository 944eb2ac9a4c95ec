//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)` and then moved to a numbered ChaCha stream. Distinct
//! consumers of the same run seed use distinct stream numbers, so adding a new
//! consumer never shifts the draws another consumer sees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream numbers reserved for the consumers of a run seed.
pub mod purpose {
    pub const ADVERSARY: u64 = 1;
    pub const EPISODES: u64 = 2;
    pub const INSTANCE: u64 = 3;
    pub const TEST: u64 = 99;
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    /// Stream 0 of `seed`.
    pub fn new(seed: u64) -> Self {
        Self::for_purpose(seed, 0)
    }

    pub fn for_purpose(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Inverse-CDF draw from nonnegative weights summing to (about) one.
    ///
    /// Round-off in the cumulative sum falls back to the last index with
    /// positive weight, so zero-probability outcomes are never returned.
    pub fn categorical<I>(&mut self, probs: I) -> usize
    where
        I: IntoIterator<Item = f64>,
    {
        let u = self.uniform();
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (i, p) in probs.into_iter().enumerate() {
            if p > 0.0 {
                cum += p;
                last_positive = i;
                if u < cum {
                    return i;
                }
            }
        }
        last_positive
    }

    /// Exponential(1) draw, used to build Dirichlet(1) rows.
    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }
}
