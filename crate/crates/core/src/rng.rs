//! Seed expansion into named, independent random streams.
//!
//! Every random quantity in the library is drawn from a stream identified by
//! a `(label, index)` pair derived from one top-level seed, so results never
//! depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// A top-level seed that can be expanded into named sub-streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SeedTree(pub u64);

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        SeedTree(seed)
    }

    /// Stream for `label`, numbered `index`. Distinct labels or indices give
    /// statistically independent streams.
    pub fn stream(&self, label: &str, index: u64) -> StreamRng {
        let key = splitmix64(self.0 ^ fnv1a(label.as_bytes()));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(index);
        rng
    }

    /// A derived seed tree, for handing a sub-task its own namespace.
    pub fn child(&self, label: &str, index: u64) -> SeedTree {
        SeedTree(splitmix64(
            splitmix64(self.0 ^ fnv1a(label.as_bytes()))
                ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        ))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
