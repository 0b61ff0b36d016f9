//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 keyed by a 64-bit seed. Independent
//! consumers draw from distinct stream ids of the same key, so the values a
//! consumer sees depend only on `(seed, stream)` and never on how many draws
//! other consumers made. Stream ids used in this crate:
//!
//! * `0 .. n_vars`: per-variable noise streams for SCM sampling.
//! * [`PERMUTATION_STREAM`]: permutation tests.
//! * [`AUX_STREAM`]: anything else (subsampling, scenario helpers).
//! * `BOOTSTRAP_STREAM + r`: bootstrap replicate `r`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PERMUTATION_STREAM: u64 = 1 << 40;
pub const AUX_STREAM: u64 = (1 << 40) + 1;
pub const BOOTSTRAP_STREAM: u64 = 1 << 41;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `count` permutations of `0..m`, drawn sequentially from the permutation
/// stream so they are identical however they are later consumed.
pub fn permutations(seed: u64, m: usize, count: usize) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut rng = stream(seed, PERMUTATION_STREAM);
    (0..count)
        .map(|_| {
            let mut p: Vec<usize> = (0..m).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect()
}
