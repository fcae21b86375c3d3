//! Counter-addressable uniform streams.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INV_2_52: f64 = 1.0 / 4_503_599_627_370_496.0;

/// Maps a 64-bit word to the open unit interval.
///
/// The top 52 bits select a cell of width `2^-52` and the result is the cell
/// midpoint, so every output is exactly representable, lies in
/// `[2^-53, 1 - 2^-53]`, and has an exactly representable reflection `1 - u`.
#[inline]
pub fn word_to_unit(w: u64) -> f64 {
    ((w >> 12) as f64 + 0.5) * INV_2_52
}

/// A reproducible stream of uniforms on (0, 1) addressed by
/// `(seed, stream_id, counter)`.
///
/// Output `n` of a stream depends only on the triple, so any position can
/// be reached without generating the preceding values, and distinct stream
/// ids give independent sequences under the same seed.
#[derive(Debug, Clone)]
pub struct UniformStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::at(seed, stream_id, 0)
    }

    /// A stream positioned so that the next output is number `counter`.
    pub fn at(seed: u64, stream_id: u64, counter: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        // Each output consumes two 32-bit words.
        rng.set_word_pos(2 * counter as u128);
        Self {
            seed,
            stream_id,
            counter,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u(&mut self) -> f64 {
        self.counter += 1;
        word_to_unit(self.rng.next_u64())
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = self.next_u();
        }
    }

    pub fn take_vec(&mut self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill(&mut v);
        v
    }
}
