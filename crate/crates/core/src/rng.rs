//! Seeded random streams.
//!
//! Every stochastic component takes a `u64` seed. Experiments derive those
//! seeds from one root seed through named substreams, so that e.g. the
//! playout stream of an MCTS run does not shift when the instance generator
//! draws a different number of values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of the substream `name` (optionally indexed) from `root`.
pub fn substream(root: u64, name: &str, index: u64) -> u64 {
    // FNV-1a over the name, then mixed with the root and the index.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(splitmix64(root ^ h).wrapping_add(index))
}
