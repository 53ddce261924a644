//! Keyed random streams.
//!
//! Every realization owns a ChaCha8 keystream (the `rand_chacha` 0.3
//! `ChaCha8Rng`, 8 rounds, 64-bit block counter and 64-bit stream id):
//!
//! * key: the 32-byte seed whose bytes `0..8` are `master_seed` in
//!   little-endian order and whose remaining 24 bytes are zero;
//! * stream: `realization_index`;
//! * position: word 0.
//!
//! Output is consumed as little-endian `u64` words (`next_u64`). Derived
//! values use fixed integer arithmetic so that a stream replays the same
//! trajectory everywhere:
//!
//! * `below(n)`: `(w as u128 * n as u128) >> 64`, one word, no rejection
//!   (bias below `n / 2^64`);
//! * `uniform()`: `(w >> 11) * 2^-53`, in `[0, 1)`;
//! * `angle()`: `uniform() * 2π`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

/// Identity of one stream: `(master_seed, realization_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub master_seed: u64,
    pub realization_index: u64,
}

impl StreamId {
    pub fn new(master_seed: u64, realization_index: u64) -> Self {
        StreamId {
            master_seed,
            realization_index,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RngStream {
    id: StreamId,
    inner: ChaCha8Rng,
}

const TWO_POW_MINUS_53: f64 = 1.0 / (1u64 << 53) as f64;

impl RngStream {
    pub fn new(id: StreamId) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&id.master_seed.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(id.realization_index);
        RngStream { id, inner }
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Integer in `[0, n)` from one word by multiply-shift.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Double in `[0, 1)` from the top 53 bits of one word.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_MINUS_53
    }

    /// Angle in `[0, 2π)`.
    #[inline]
    pub fn angle(&mut self) -> f64 {
        self.uniform() * std::f64::consts::TAU
    }
}
