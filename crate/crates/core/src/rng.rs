//! Seeded, splittable random streams.
//!
//! Every random draw in the crate comes from ChaCha8 keyed with
//! `ChaCha8Rng::seed_from_u64(seed)`. Independent substreams select the
//! ChaCha stream id `(fnv1a32(label) << 32) | index`, so each image, batch or
//! matrix gets its own sequence and work can be split without changing the
//! result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn fnv1a32(label: &str) -> u32 {
    label.bytes().fold(0x811c_9dc5u32, |h, b| {
        (h ^ u32::from(b)).wrapping_mul(0x0100_0193)
    })
}

/// Stream `index` of the family `label` under `seed`.
pub fn substream(seed: u64, label: &str, index: u32) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(fnv1a32(label)) << 32) | u64::from(index));
    rng
}
