//! Seeded uniform streams.
//!
//! Every random quantity in the crate is read from a ChaCha8 keystream keyed
//! by `ChaCha8Rng::seed_from_u64(seed)`. Independent purposes use distinct
//! ChaCha stream ids (see the `STREAM_*` constants), and work is split across
//! threads by *position* inside one stream: draw number `d` of a stream is the
//! 64-bit word starting at keystream word `2 * d`. A worker that handles
//! replicates `r0..r1`, each consuming `w` draws, seeks to draw `r0 * w` and
//! reads sequentially. The output is therefore identical to a single
//! sequential pass, whatever the thread count or block size.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Innovations for `sample` and process simulation.
pub const STREAM_INNOVATIONS: u64 = 0;
/// Innovations for truncation diagnostics.
pub const STREAM_DIAGNOSTIC: u64 = 1;
/// Base id for limit-measure integration; tuple `i` uses `STREAM_INTEGRATION + i`.
pub const STREAM_INTEGRATION: u64 = 1 << 32;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Clone, Debug)]
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::at(seed, stream, 0)
    }

    /// Stream positioned so that the next value is draw number `draw`.
    pub fn at(seed: u64, stream: u64, draw: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(2 * draw as u128);
        Self { rng }
    }

    /// Uniform on (0, 1], with 53 bits of resolution.
    #[inline]
    pub fn next_open_closed(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * TWO_POW_M53
    }
}
