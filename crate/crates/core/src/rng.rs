//! Seeded, platform-independent random streams.
//!
//! Every random draw in the crate goes through [`TypeSampler`], which wraps a
//! ChaCha8 stream seeded with `ChaCha8Rng::seed_from_u64(seed)`. A uniform
//! variate is built from the top 53 bits of one `next_u64()` call,
//! `u = (x >> 11) * 2^-53`, so `u` lies in `[0, 1)` and has an exact binary
//! representation. A discrete index is obtained by inverse CDF: the first `k`
//! with `u < cdf[k]`, where `cdf` is the running sum of the probabilities
//! in declaration order. Any implementation of ChaCha8 with the same
//! seeding reproduces the index sequence bit for bit.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// Uniform `[0, 1)` draw from a 64-bit word.
#[inline]
pub fn unit_from_bits(x: u64) -> f64 {
    (x >> 11) as f64 * TWO_POW_M53
}

/// Inverse-CDF sampler for a finite law.
#[derive(Debug, Clone)]
pub struct TypeSampler {
    rng: ChaCha8Rng,
    cdf: Vec<f64>,
}

impl TypeSampler {
    pub fn new(probabilities: &[f64], seed: u64) -> Self {
        let mut acc = 0.0;
        let cdf = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cdf,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        unit_from_bits(self.rng.next_u64())
    }

    pub fn next_index(&mut self) -> usize {
        let u = self.uniform();
        // Rounding can leave the last cumulative value a hair below 1.
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1)
    }
}
