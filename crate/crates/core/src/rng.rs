//! Seeded pseudo-random streams.
//!
//! Every random decision in the crate goes through [`Prng`], a SplitMix64
//! generator. A run has one master seed; each consumer derives its own
//! substream with [`Prng::substream`] so that, for example, changing the
//! number of dropout draws never perturbs the weight initialization.
//!
//! Substream seeds are `master + (stream code << 40) + index * 0x9E3779B97F4A7C15`
//! (wrapping), which SplitMix64 then scrambles. Stream codes are fixed by
//! [`Stream`] and must not be renumbered: doing so changes every result.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};

/// Consumers of randomness, each with its own stream code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Shuffle = 3,
    Split = 4,
    Synth = 5,
    Search = 6,
    Fold = 7,
}

const INDEX_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct Prng(SplitMix64);

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    /// Independent stream for `stream`/`index` under a master seed.
    pub fn substream(master: u64, stream: Stream, index: u64) -> Self {
        let seed = master
            .wrapping_add((stream as u64) << 40)
            .wrapping_add(index.wrapping_mul(INDEX_STRIDE));
        Self::new(seed)
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidRange { lo, hi });
        }
        let v = lo + (hi - lo) * self.next_f64();
        // rounding can land exactly on hi for tiny ranges
        Ok(if v < hi { v } else { lo })
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.0.random_range(lo..=hi)
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        match Normal::new(mean, std_dev) {
            Ok(dist) => dist.sample(&mut self.0),
            Err(_) => mean,
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.0);
    }
}

impl RngCore for Prng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
