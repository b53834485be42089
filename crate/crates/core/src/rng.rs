//! Seed derivation: one seed per trial, one independent stream per consumer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `trial_index`; depends on nothing but its two inputs.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    mix64(mix64(master_seed) ^ trial_index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Spawn = 0,
    LinkSampling = 1,
    DeliveryDraws = 2,
    JoinScan = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// The per-trial streams.
#[derive(Debug, Clone)]
pub struct TrialRngs {
    pub spawn: ChaCha8Rng,
    pub link: ChaCha8Rng,
    pub delivery: ChaCha8Rng,
    pub join: ChaCha8Rng,
}

impl TrialRngs {
    pub fn new(seed: u64) -> Self {
        Self {
            spawn: stream_rng(seed, Stream::Spawn),
            link: stream_rng(seed, Stream::LinkSampling),
            delivery: stream_rng(seed, Stream::DeliveryDraws),
            join: stream_rng(seed, Stream::JoinScan),
        }
    }
}
