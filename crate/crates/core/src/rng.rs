//! Counter-based splittable random streams.
//!
//! Every stochastic choice in the pipeline is drawn from a [`SeedStream`]
//! derived from a single 64-bit seed. Child streams are addressed by a
//! counter, so the value drawn for record `k` never depends on how many
//! values were drawn for records `0..k` or on thread scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// A seeded ChaCha stream that can be split by counter.
#[derive(Clone, Debug)]
pub struct SeedStream {
    seed: u64,
    rng: ChaCha12Rng,
}

/// SplitMix64 finalizer; mixes a seed and a counter into a new seed.
pub fn mix(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream number `counter`. Does not advance `self`.
    pub fn split(&self, counter: u64) -> SeedStream {
        SeedStream::new(mix(self.seed, counter))
    }

    /// Child stream keyed by a label, for named sub-steps of one sample.
    pub fn fork(&self, label: &str) -> SeedStream {
        let h = label.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100_0000_01B3)
        });
        self.split(h)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        // rejection sampling to avoid modulo bias
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal via Box-Muller (one value per call, no caching).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_independent_of_parent_position() {
        let a = SeedStream::new(7);
        let mut b = SeedStream::new(7);
        for _ in 0..10 {
            b.uniform();
        }
        assert_eq!(a.split(3).next_u64(), b.split(3).next_u64());
        assert_ne!(a.split(3).next_u64(), a.split(4).next_u64());
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut s = SeedStream::new(1);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn below_covers_range() {
        let mut s = SeedStream::new(2);
        let mut seen = [false; 5];
        for _ in 0..200 {
            seen[s.below(5)] = true;
        }
        assert!(seen.iter().all(|&x| x));
    }
}
