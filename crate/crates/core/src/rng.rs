//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream selected by a
//! `(seed, stream)` pair. ChaCha is counter based, so parallel trials can
//! each own a stream and still reproduce exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::Real;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministically combines a base seed with tags into a new seed
/// (SplitMix64 finaliser applied per tag).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut h = base ^ 0x9E37_79B9_7F4A_7C15;
    for &t in tags {
        h = splitmix(h ^ splitmix(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let v: f64 = StandardNormal.sample(rng);
    T::c(v)
}

pub fn gaussian_vec<T: Real, R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<T> {
    (0..len).map(|_| gaussian(rng)).collect()
}

/// Uniformly distributed point on the unit sphere of `ℝ^len`.
pub fn unit_vector<T: Real, R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<T> {
    loop {
        let v: Vec<T> = gaussian_vec(rng, len);
        let n = crate::linalg::norm2(&v);
        if n > T::zero() {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform point on the probability simplex (Dirichlet(1, …, 1)) via
/// normalised exponentials.
pub fn simplex_point<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let e: Vec<f64> = (0..len).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = e.iter().sum();
        if s > 0.0 {
            return e.into_iter().map(|x| x / s).collect();
        }
    }
}
