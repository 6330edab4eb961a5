//! Splittable seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a `u64`.
//! Child seeds are derived with the SplitMix64 finalizer so any trial,
//! measurement-rate point or noise draw can be regenerated in isolation from
//! the master seed and its coordinates.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child seed for `(parent, index)`; distinct indices give distinct seeds.
pub fn derive(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Named random streams within a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    State = 1,
    Ensemble = 2,
    Gaussian = 3,
    Outliers = 4,
    Sharding = 5,
}

pub fn stream_seed(parent: u64, stream: Stream) -> u64 {
    derive(parent, (stream as u64) << 32)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k` distinct values from `0..total`, uniformly, in draw order.
///
/// Partial Fisher–Yates with the displaced entries kept in a hash map, so
/// memory is O(k) regardless of `total`.
pub fn sample_without_replacement(rng: &mut impl Rng, total: u64, k: usize) -> Vec<u64> {
    assert!(k as u64 <= total, "cannot draw {k} of {total}");
    let mut displaced: HashMap<u64, u64> = HashMap::with_capacity(2 * k);
    let mut out = Vec::with_capacity(k);
    for i in 0..k as u64 {
        let j = rng.random_range(i..total);
        let at_j = *displaced.get(&j).unwrap_or(&j);
        let at_i = *displaced.get(&i).unwrap_or(&i);
        displaced.insert(j, at_i);
        out.push(at_j);
    }
    out
}
