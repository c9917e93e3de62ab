//! Counter-based random streams.
//!
//! Draw `j` of stream `i` is a pure function of `(seed, i, j)`, so any
//! partition of the sample index space across workers reproduces the same
//! values. Streams are derived from a SplitMix64 chain whose initial state
//! mixes the seed and the stream index.

/// One deterministic substream of a seeded generator.
#[derive(Clone, Debug)]
pub struct SampleRng {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SampleRng {
    /// Stream `index` of generator `seed`.
    pub fn substream(seed: u64, index: u64) -> Self {
        let a = mix64(seed.wrapping_add(GOLDEN));
        let b = mix64(index.wrapping_mul(GOLDEN).wrapping_add(0x6A09_E667_F3BC_C909));
        SampleRng {
            state: mix64(a ^ b),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw over `0..n`.
    pub fn next_below(&mut self, n: u64) -> u64 {
        if n == 0 {
            0
        } else {
            // Modulo bias is irrelevant at our n << 2^64.
            self.next_u64() % n
        }
    }
}
