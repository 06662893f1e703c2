//! Counter-keyed random substreams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by
//! `(seed, domain)` and positioned by an index, so results depend only on
//! the seed and never on evaluation order or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates the key spaces of unrelated consumers sharing one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    SyntheticCoefficients = 1,
    SyntheticCounties = 2,
    FoldShuffle = 3,
    MonteCarlo = 4,
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
