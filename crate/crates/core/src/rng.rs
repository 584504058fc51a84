//! Counter-addressed random stream.
//!
//! The generator is ChaCha8 as specified by `rand_chacha` (value-stable across
//! platforms and releases). A stream is addressed by `(seed, stream, counter)`:
//! the key is derived from `seed` with `SeedableRng::seed_from_u64`, `stream`
//! selects the ChaCha stream id and `counter` the index of the next 64-bit
//! word. Uniform reals are the top 53 bits of that word scaled by 2⁻⁵³.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    counter: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::at(seed, 0, 0)
    }

    /// Positions a stream at an arbitrary `(seed, stream, counter)`.
    pub fn at(seed: u64, stream: u64, counter: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        // word_pos counts 32-bit words
        inner.set_word_pos(u128::from(counter) * 2);
        RngStream { seed, stream, counter, inner }
    }

    /// Independent stream for trial `index`, derived from this stream's seed.
    ///
    /// Substreams depend only on `(seed, index)`, so per-trial results do not
    /// depend on the order trials are scheduled in.
    pub fn substream(&self, index: u64) -> Self {
        Self::at(self.seed, index.wrapping_add(1), 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        RngCore::next_u64(&mut self.inner)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_uniform<T: Scalar>(&mut self) -> T {
        T::of(self.next_f64())
    }
}

/// Every draw consumes one 64-bit word, so the counter stays exact.
impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (RngStream::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        RngStream::next_u64(self)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = RngStream::next_u64(self).to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

impl PartialEq for RngStream {
    fn eq(&self, other: &Self) -> bool {
        (self.seed, self.stream, self.counter) == (other.seed, other.stream, other.counter)
    }
}

impl Eq for RngStream {}
