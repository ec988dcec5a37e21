//! Deterministic substream derivation from a master seed.
//!
//! Every simulation concern (source, channel, eavesdropper, receiver,
//! scheduling) draws from its own named stream so that results do not depend
//! on the interleaving of draws across concerns. Substream `k` is a ChaCha12
//! generator seeded with the `k`-th output of the SplitMix64 counter sequence
//! anchored at the master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Named substreams, in counter order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamLabel {
    Source = 0,
    Channel = 1,
    Eve = 2,
    Bob = 3,
    Schedule = 4,
}

/// Derives the generator for one named substream of `master`.
pub fn substream(master: u64, label: StreamLabel) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(splitmix64_output(master, label as u64))
}

// k-th output of SplitMix64 started at `seed`, computed directly from the
// counter rather than by stepping.
fn splitmix64_output(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add((k.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The full substream bundle used by a protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolRngs {
    pub source: ChaCha12Rng,
    pub channel: ChaCha12Rng,
    pub eve: ChaCha12Rng,
    pub bob: ChaCha12Rng,
    pub schedule: ChaCha12Rng,
}

impl ProtocolRngs {
    pub fn from_master(master: u64) -> Self {
        Self {
            source: substream(master, StreamLabel::Source),
            channel: substream(master, StreamLabel::Channel),
            eve: substream(master, StreamLabel::Eve),
            bob: substream(master, StreamLabel::Bob),
            schedule: substream(master, StreamLabel::Schedule),
        }
    }
}
