//! Deterministic pseudo-random numbers.
//!
//! Everything randomized in this crate draws from [`SplitMix64`], a
//! counter-based 64-bit generator: the state is a counter advanced by a fixed
//! odd stride, and each output is a finalizing hash of the counter. Identical
//! seeds therefore reproduce identical sequences on every platform, and the
//! generator is trivial to port for cross-language checks.
//!
//! Independent streams are derived with [`SplitMix64::stream`]: stream `k` of
//! seed `s` starts its counter at `mix(s) + k * STREAM_STRIDE`. Since outputs
//! are hashes of counter values, two streams only correlate if their counter
//! ranges overlap, which takes on the order of 2^64 draws.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_STRIDE: u64 = 0xD2B7_4407_B1CE_6E93;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 generator.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Generator for substream `id` of `seed`; see the module docs.
    pub fn stream(seed: u64, id: u64) -> Self {
        Self {
            state: mix(seed).wrapping_add(id.wrapping_mul(STREAM_STRIDE)),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform draw from `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform draw from `0..n` (requires `n > 0`).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.next_u64() >> 11) as u128 * n as u128) >> 53) as usize
    }

    /// Index draw from an unnormalized weight vector. Entries with zero
    /// weight are never returned.
    pub fn pick_weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0);
        let target = self.next_f64() * total;
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (idx, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                cum += w;
                last_positive = idx;
                if target < cum {
                    return idx;
                }
            }
        }
        last_positive
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
