//! Counter-based deterministic random streams.
//!
//! Every shot of a Monte Carlo run draws from its own substream keyed by
//! `(seed, stream id)`, so a run is a pure function of its inputs: the same
//! seed produces bit-identical output no matter how the shots are scheduled
//! across threads. Generation is stateless splitmix64 over an incrementing
//! counter, which is plenty for sampling work and costs a handful of
//! arithmetic ops per draw.

use rand::RngCore;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One independent pseudo-random substream.
#[derive(Debug, Clone)]
pub struct Stream {
    base: u64,
    counter: u64,
}

impl Stream {
    /// Substream for `(seed, id)`. Distinct ids give statistically
    /// independent sequences; the same pair always replays the same sequence.
    pub fn new(seed: u64, id: u64) -> Self {
        let base = mix64(mix64(seed ^ GOLDEN_GAMMA).wrapping_add(id.wrapping_mul(GOLDEN_GAMMA)));
        Self { base, counter: 0 }
    }

    /// Derive a child stream without disturbing this one, e.g. one stream per
    /// bootstrap replicate hanging off a run-level stream.
    pub fn child(&self, label: u64) -> Self {
        Self::new(self.base, label ^ 0xD134_2543_DE82_EF95)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.base.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        (Stream::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        Stream::next_u64(self)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = Stream::next_u64(self).to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
