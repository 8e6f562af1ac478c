//! Keyed random streams derived from one master seed.
//!
//! Every consumer gets its own ChaCha stream selected by
//! `(purpose, trial, class)`, so results do not depend on the order in which
//! trials or classes are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Beta = 1,
    Rounding = 2,
    Generate = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, purpose: Purpose, trial: u64, class: i64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = splitmix64(splitmix64(splitmix64(purpose as u64) ^ trial) ^ class as u64);
    rng.set_stream(id);
    rng
}
