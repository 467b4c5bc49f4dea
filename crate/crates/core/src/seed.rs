//! Named sub-streams derived from a single user seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used for generating problem instances.
pub const INSTANCE: &str = "instance";
/// Stream used for measurement-branch sampling.
pub const BRANCH: &str = "branch";
/// Stream used for random initial states.
pub const INIT: &str = "init";

/// Mix a base seed with a stream name and an index into a new 64-bit seed.
///
/// FNV-1a over the name followed by two rounds of splitmix64 finalization.
pub fn derive(base: u64, stream: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(splitmix(base ^ h).wrapping_add(index))
}

pub fn rng(base: u64, stream: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, stream, index))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
