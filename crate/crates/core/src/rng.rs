//! Counter-keyed random streams.
//!
//! Every random draw in the crate comes from a [`StreamKey`]: a root seed
//! followed by a path of integer labels (substream tag, rung, iteration,
//! specimen, ...). The key is hashed into a ChaCha8 seed, so a stream depends
//! only on its path and never on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named substreams hanging off a root seed.
pub mod tag {
    pub const LIKELIHOOD: u64 = 0x4c49_4b45;
    pub const PROPOSAL: u64 = 0x5052_4f50;
    pub const ACCEPT: u64 = 0x4143_4350;
    pub const SWAP: u64 = 0x5357_4150;
    pub const INIT: u64 = 0x494e_4954;
    pub const SIMULATE: u64 = 0x5349_4d55;
    pub const PREDICT: u64 = 0x5052_4544;
    pub const REPLICATE: u64 = 0x5245_504c;
    pub const CHECK: u64 = 0x4348_4543;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Position in the tree of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    hi: u64,
    lo: u64,
}

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey {
            hi: splitmix(seed),
            lo: splitmix(seed ^ 0x5eed_5eed_5eed_5eed),
        }
    }

    /// Derives the child labelled `label`.
    #[inline]
    pub fn child(self, label: u64) -> Self {
        let hi = splitmix(self.hi ^ splitmix(label));
        let lo = splitmix(self.lo.rotate_left(17) ^ label.wrapping_mul(GOLDEN) ^ hi);
        StreamKey { hi, lo }
    }

    /// Follows a path of labels.
    pub fn path(self, labels: &[u64]) -> Self {
        labels.iter().fold(self, |k, &l| k.child(l))
    }

    /// Materializes the generator for this key.
    pub fn rng(self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let words = [
            splitmix(self.hi),
            splitmix(self.lo),
            splitmix(self.hi ^ self.lo.rotate_left(32)),
            splitmix(self.lo.wrapping_add(self.hi)),
        ];
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashSet;

    #[test]
    fn same_path_same_stream() {
        let a: Vec<u64> = StreamKey::root(7).path(&[1, 2, 3]).rng().random_iter().take(8).collect();
        let b: Vec<u64> = StreamKey::root(7).path(&[1, 2, 3]).rng().random_iter().take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn sibling_and_order_sensitive() {
        let root = StreamKey::root(7);
        assert_ne!(root.path(&[1, 2]), root.path(&[2, 1]));
        assert_ne!(root.child(0), root.child(1));
        assert_ne!(StreamKey::root(7), StreamKey::root(8));
    }

    #[test]
    fn no_collisions_over_grid() {
        let root = StreamKey::root(42);
        let mut seen = HashSet::new();
        for r in 0..20 {
            for it in 0..500 {
                assert!(seen.insert(root.path(&[tag::LIKELIHOOD, r, it])));
            }
        }
    }
}
