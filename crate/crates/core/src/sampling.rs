//! Seeded, counter-based random draws of germ realizations.
//!
//! Every draw is addressed by `(seed, stream, index)`: a ChaCha8 generator is
//! keyed by the seed, placed on a stream and positioned at a word offset, so
//! any draw can be reproduced without replaying the ones before it and work
//! can be split across threads without changing results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::polybasis::Germ;

/// Generator for one stream, positioned at its `index`-th 64-bit word.
pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * index as u128);
    rng
}

/// Uniform draw on the open interval `(0, 1)` (never exactly 0 or 1), so
/// inverse CDFs of unbounded distributions stay finite.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// The `index`-th independent realization (natural units) of `germs`.
pub fn realization(germs: &[Germ], seed: u64, index: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, index, 0);
    germs
        .iter()
        .map(|g| g.distribution.quantile(open_unit(&mut rng)))
        .collect()
}
