//! Seeded random streams.
//!
//! Every stochastic component draws from a PCG-XSL-RR 128/64 generator
//! (`rand_pcg::Pcg64`). Streams are derived from a top-level `u64` seed plus
//! a path of integer labels (window index, objective index, restart index, ...)
//! by folding the labels through SplitMix64. The resulting 128-bit state and
//! 128-bit stream selector are fixed functions of `(seed, labels)`, so results
//! do not depend on thread scheduling, platform word size, or call order.

use rand::Rng;
use rand_pcg::Pcg64;

pub type StreamRng = Pcg64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a label path.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &label in labels {
        state ^= label.wrapping_mul(GOLDEN_GAMMA) ^ out;
        out = splitmix64(&mut state);
    }
    out
}

/// Builds the generator for `(seed, labels)`.
pub fn stream(seed: u64, labels: &[u64]) -> StreamRng {
    let mut state = derive_seed(seed, labels);
    let a = splitmix64(&mut state) as u128;
    let b = splitmix64(&mut state) as u128;
    let c = splitmix64(&mut state) as u128;
    let d = splitmix64(&mut state) as u128;
    Pcg64::new((a << 64) | b, (c << 64) | d)
}

/// Uniform integer in `0..bound` sampled through `u64` so 32- and 64-bit
/// targets agree.
pub fn index_below<R: Rng + ?Sized>(rng: &mut R, bound: usize) -> usize {
    debug_assert!(bound > 0);
    rng.random_range(0..bound as u64) as usize
}

/// In-place Fisher-Yates shuffle built on [`index_below`].
pub fn shuffle<T, R: Rng + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index_below(rng, i + 1);
        items.swap(i, j);
    }
}
