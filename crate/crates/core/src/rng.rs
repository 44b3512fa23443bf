//! Seeded, portable random streams.
//!
//! Every stochastic routine takes a [`ChaCha8Rng`]. Independent streams are
//! derived from one 64-bit seed by setting the ChaCha stream word to
//! `stream_id(trial, role, index)`: the trial in the high 32 bits, a role tag
//! in the next 16 bits and a per-role index (head, batch, ...) in the low 16.

use nalgebra::{Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::so3::UnitQuaternion;

pub type StreamRng = ChaCha8Rng;

/// Role tags for [`stream_id`].
pub mod role {
    pub const GENERIC: u16 = 0;
    pub const INIT: u16 = 1;
    pub const TRAIN_DATA: u16 = 2;
    pub const TEST_DATA: u16 = 3;
    pub const LEARNING_RATE: u16 = 4;
    pub const CORRUPTION: u16 = 5;
    pub const CALIBRATION: u16 = 6;
}

pub fn stream_id(trial: u32, role: u16, index: u16) -> u64 {
    ((trial as u64) << 32) | ((role as u64) << 16) | index as u64
}

/// Generator for `seed` on the given stream.
pub fn seeded(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(gaussian(rng), gaussian(rng), gaussian(rng))
}

/// Uniform direction on S² from a normalized isotropic Gaussian.
pub fn random_unit_vector3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = gaussian3(rng);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Haar-uniform rotation as a unit quaternion (normalized 4-D Gaussian).
pub fn random_rotation_quat<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion {
    loop {
        let v = Vector4::new(gaussian(rng), gaussian(rng), gaussian(rng), gaussian(rng));
        if let Ok(q) = UnitQuaternion::new_normalize(v) {
            return q;
        }
    }
}

/// Log-uniform sample in `[lo, hi]`.
pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    let (a, b) = (lo.ln(), hi.ln());
    (a + (b - a) * rng.random::<f64>()).exp()
}
