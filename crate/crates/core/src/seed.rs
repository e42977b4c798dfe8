//! Seed derivation tree.
//!
//! Every random stream in a run is derived from one master seed. A child
//! seed is obtained from its parent either by a purpose label or by an
//! integer index:
//!
//! ```text
//! child(parent, label) = splitmix64(parent ^ fnv1a64(label))
//! index(parent, i)     = splitmix64(parent + (i + 1) * 0x9E3779B97F4A7C15)
//! ```
//!
//! Streams are `ChaCha8Rng` instances seeded from the derived `u64`.
//! The tree used by the simulator is:
//!
//! ```text
//! master
//! ├── "data"         synthetic generation, client split
//! ├── "model-init"   initial parameters
//! ├── "unigram"      geometric noise for the unigram releases (then "T"/"S")
//! └── "run/<kind>"   one subtree per schedule
//!     └── "phase/<name>"
//!         ├── "sample" → index(round)   Poisson cohort sampling
//!         └── "noise"  → index(round)   Gaussian aggregation noise
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// A node in the seed derivation tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    pub fn child(self, label: &str) -> Seed {
        Seed(splitmix64(self.0 ^ fnv1a64(label.as_bytes())))
    }

    pub fn index(self, i: u64) -> Seed {
        Seed(splitmix64(
            self.0.wrapping_add(i.wrapping_add(1).wrapping_mul(GOLDEN)),
        ))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_are_distinct_and_stable() {
        let root = Seed(42);
        assert_eq!(root.child("data"), root.child("data"));
        assert_ne!(root.child("data"), root.child("noise"));
        assert_ne!(root.index(0), root.index(1));
        assert_ne!(root.index(0), root);
    }
}
