//! Counter-based uniform variates.
//!
//! Every sample owns an independent stream. The stream seed is
//!
//! ```text
//! stream_seed = splitmix64_mix(master_seed ^ splitmix64_mix(sample_index + GOLDEN_GAMMA))
//! ```
//!
//! and the stream itself is SplitMix64 started at `stream_seed`. A uniform
//! variate is the top 53 bits of a stream output scaled by `2^-53`, so it lies
//! in `[0, 1)`. The whole construction is fixed; changing it changes every
//! reproduced result.

/// Weyl increment of SplitMix64.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output finalizer (Stafford variant 13).
#[inline]
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream belonging to `(master_seed, sample_index)`.
#[inline]
pub fn stream_seed(master_seed: u64, sample_index: u64) -> u64 {
    splitmix64_mix(master_seed ^ splitmix64_mix(sample_index.wrapping_add(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn for_sample(master_seed: u64, sample_index: u64) -> Self {
        Self::new(stream_seed(master_seed, sample_index))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        splitmix64_mix(self.state)
    }

    /// Uniform variate in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
