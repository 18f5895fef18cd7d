//! Seeded random substreams.
//!
//! Every stochastic component draws from its own ChaCha8 stream derived from
//! the experiment seed and a stream name. Components therefore stay
//! reproducible independently of each other: adding a dropout draw never
//! shifts the minibatch shuffle, and regenerating month 7 of a synthetic
//! dataset never perturbs month 8.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Names for the independent random streams used across the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Network parameter initialization.
    Init,
    /// Action sampling during rollouts.
    Rollout,
    /// Minibatch shuffling during updates.
    MinibatchShuffle,
    /// Dropout masks during training forwards.
    Dropout,
    /// Synthetic data generation (per-month sample draws).
    DataGen,
    /// Synthetic data generation (feature-role assignment tables).
    DriftTables,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Rollout => 2,
            Stream::MinibatchShuffle => 3,
            Stream::Dropout => 4,
            Stream::DataGen => 5,
            Stream::DriftTables => 6,
        }
    }
}

/// SplitMix64 finalizer; used to decorrelate seed/stream/index triples.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(seed: u64, stream: u64, index: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ stream.wrapping_mul(0xA24B_AED4_963E_E407));
    splitmix64(h ^ index.wrapping_mul(0x9FB2_1C65_1E98_DF25))
}

/// A ChaCha8 generator for `stream`, derived from `seed`.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    substream_indexed(seed, stream, 0)
}

/// A ChaCha8 generator for the `index`-th member of a stream family
/// (for example, one generator per generated month).
pub fn substream_indexed(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, stream.id(), index))
}
