//! Named, reproducible seed streams derived from one user seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the sub-stream `name` (e.g. "init", "fps", "confusion").
pub fn substream(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then mixed with the seed.
    let tag = name
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    splitmix64(seed ^ splitmix64(tag))
}

/// Seed for the `index`-th draw of a stream.
pub fn indexed(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(index)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
