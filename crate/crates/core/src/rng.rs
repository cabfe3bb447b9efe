//! Seeded, splittable random streams.
//!
//! All randomness in the crate flows from a [`RandomStream`]. A stream is a
//! value: splitting it by a label yields a child whose draws depend only on
//! the parent's identity and the label, never on how much any sibling has
//! been consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    seed: u64,
    path: u64,
}

/// Anything that can name a child stream.
pub trait StreamLabel {
    fn label_hash(&self) -> u64;
}

impl StreamLabel for &str {
    fn label_hash(&self) -> u64 {
        fnv1a(self.as_bytes())
    }
}

impl StreamLabel for u64 {
    fn label_hash(&self) -> u64 {
        fnv1a(&self.to_le_bytes()) ^ 0x9e37_79b9_7f4a_7c15
    }
}

impl StreamLabel for usize {
    fn label_hash(&self) -> u64 {
        (*self as u64).label_hash()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream { seed, path: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Deterministic child stream for `label`.
    pub fn split<L: StreamLabel>(&self, label: L) -> RandomStream {
        RandomStream {
            seed: self.seed,
            path: mix(self.path ^ mix(label.label_hash())),
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed) ^ self.path.rotate_left(17));
        rng.set_stream(self.path);
        rng
    }
}

/// Child stream for `(seed, label)`.
pub fn split_stream<L: StreamLabel>(seed: u64, label: L) -> RandomStream {
    RandomStream::new(seed).split(label)
}
