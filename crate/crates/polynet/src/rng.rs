//! Seeded randomness helpers.
//!
//! Every stochastic component derives its generator from `(seed, stream)` so
//! results are identical regardless of scheduling or call order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Scalar;

/// ChaCha generator for a `(seed, stream)` pair.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a tag into a seed (SplitMix64 finalizer) for per-iteration derivation.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal sample via Box-Muller.
pub fn standard_normal<T: Scalar, R: Rng>(rng: &mut R) -> T {
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        if u1 > 0.0 {
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            return T::of(z);
        }
    }
}

pub fn gaussian_vec<T: Scalar, R: Rng>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n).map(|_| standard_normal(rng)).collect()
}

/// Gaussian direction normalized to unit length; resamples on the
/// (measure-zero) chance of a zero draw.
pub fn unit_gaussian<T: Scalar, R: Rng>(rng: &mut R, n: usize) -> Vec<T> {
    loop {
        let mut v = gaussian_vec::<T, R>(rng, n);
        let norm = crate::linalg::norm2(&v);
        if norm > T::zero() {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}
