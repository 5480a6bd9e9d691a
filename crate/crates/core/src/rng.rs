//! Deterministic random streams.
//!
//! Every random draw in the library comes from a [`SimRng`], which is
//! ChaCha8 keyed by `seed_from_u64(seed)` with the stream counter set to a
//! caller-chosen index. Identical `(seed, stream)` pairs reproduce identical
//! draws on every platform.
//!
//! Primitive draws:
//! - uniform on `[0, 1)`: `rand`'s 53-bit `Standard` sampler for `f64`;
//! - standard normal: Box-Muller, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`,
//!   consuming exactly two uniforms per normal (the sine branch is discarded).

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Opens stream `stream` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser; used to derive child seeds from a parent seed.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `index` under `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index))
}

#[inline]
pub fn uniform(rng: &mut SimRng) -> f64 {
    rng.gen::<f64>()
}

#[inline]
pub fn standard_normal(rng: &mut SimRng) -> f64 {
    let u1 = uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos()
}

#[inline]
pub fn coin(rng: &mut SimRng) -> bool {
    uniform(rng) < 0.5
}
