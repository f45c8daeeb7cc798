//! Counter-addressable random streams.
//!
//! A stream is selected by `(seed, domain, stream_id)`; within it, word
//! position `k` is addressable in O(1), so any draw can be regenerated
//! without replaying its predecessors.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Domain tags keep streams for different purposes disjoint under the same
/// user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Brownian = 0x4252_4f57_4e49_414e,
    Probe = 0x5052_4f42_4553_4d50,
}

#[derive(Clone)]
pub struct CounterStream {
    rng: ChaCha8Rng,
}

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

impl CounterStream {
    pub fn new(seed: u64, domain: Domain, stream_id: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_id);
        Self { rng }
    }

    /// Positions the stream at its `index`-th 64-bit draw.
    pub fn seek(&mut self, index: u64) {
        // one u64 consumes two 32-bit words
        self.rng.set_word_pos(u128::from(index) * 2);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * TWO_POW_NEG_53
    }

    /// Standard normal via the inverse CDF.
    pub fn next_std_normal(&mut self) -> f64 {
        std_normal_quantile(self.next_open01())
    }
}

pub fn std_normal_quantile(u: f64) -> f64 {
    thread_local! {
        static STD: Normal = Normal::standard();
    }
    STD.with(|n| n.inverse_cdf(u))
}
