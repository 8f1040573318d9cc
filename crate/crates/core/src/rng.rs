//! Reproducible random streams.
//!
//! An [`RngStream`] is a plain value naming a `(seed, stream_index)` pair.
//! Every consumer builds its own generator from it, so two consumers holding
//! equal streams observe identical sequences. The generator is ChaCha8 keyed
//! by `seed` (expanded with PCG32 as in `rand_core::SeedableRng::seed_from_u64`)
//! with the ChaCha stream word set to `stream_index`; both steps are
//! platform-independent.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub const fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream_index);
        StreamRng { inner }
    }

    /// Sibling stream sharing the seed.
    pub const fn with_index(&self, stream_index: u64) -> Self {
        Self::new(self.seed, stream_index)
    }
}

pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    /// Uniform draw from the open interval (0, 1).
    ///
    /// Returns `(2k + 1) / 2^53` for a uniform 52-bit `k`; every value is
    /// exactly representable, as is `1 - u`, and neither endpoint is reachable.
    pub fn uniform_open(&mut self) -> f64 {
        let k = self.inner.next_u64() >> 12;
        ((2 * k + 1) as f64) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        let k = self.inner.next_u64() >> 11;
        lo + (hi - lo) * (k as f64 * (1.0 / (1u64 << 53) as f64))
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a path of integer labels.
///
/// Each label is folded in with one SplitMix64 round:
/// `h <- splitmix64(h ^ splitmix64(label))`, starting from `h = master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |h, &label| splitmix64(h ^ splitmix64(label)))
}
