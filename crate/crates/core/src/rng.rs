//! Seed splitting for reproducible parallel experiments.
//!
//! Every independent unit of work draws from its own ChaCha stream keyed by
//! `(master seed, unit kind, unit index)`, so the order in which a thread pool
//! schedules units cannot change any result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type LabRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl Seed {
    /// Child seed for unit `index` of the given kind.
    pub fn derive(self, kind: &str, index: u64) -> Seed {
        let h = splitmix64(self.0 ^ splitmix64(fnv1a(kind)));
        Seed(splitmix64(h ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    pub fn rng(self) -> LabRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
