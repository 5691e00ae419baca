//! Seeded random streams.
//!
//! Every stochastic operation takes a caller-owned [`Stream`]. Independent
//! streams are derived from a master seed and a path of integer labels, so
//! a trial's randomness depends only on `(master seed, labels)` and never on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::linalg::{CVector, C64};

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a master seed with a label path into a child seed.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn stream(master: u64, labels: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(master, labels))
}

/// Stable 64-bit label for a string (FNV-1a).
pub fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// `len` i.i.d. CN(0, 1) samples: real and imaginary parts each of variance 1/2.
pub fn complex_normal(rng: &mut Stream, len: usize) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(len, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// `len` entries `modulus * exp(j φ)` with φ uniform on `[0, 2π)`.
pub fn random_phases(rng: &mut Stream, len: usize, modulus: f64) -> CVector {
    let dist = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
    CVector::from_fn(len, |_, _| C64::from_polar(modulus, dist.sample(rng)))
}
