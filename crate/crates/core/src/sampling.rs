//! Seeded random streams and the small noise primitives shared by the simulators.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{RigidTransform, UnitVec3, Vec3};

/// Independent stream for trial `index` under `master_seed`.
///
/// Streams depend only on `(master_seed, index)`, so results do not change
/// with execution order or thread count.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    z * sigma
}

/// Isotropic Gaussian vector with per-axis standard deviation `sigma`.
pub fn normal_vec<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec3 {
    Vec3::new(normal(rng, sigma), normal(rng, sigma), normal(rng, sigma))
}

/// Any unit vector perpendicular to `v`.
pub fn perpendicular(v: UnitVec3) -> UnitVec3 {
    let a = v.as_vec();
    let helper = if a.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    UnitVec3::new_normalize(a.cross(helper)).expect("helper axis is never parallel to v")
}

/// Tilts `v` by `angle` radians about a uniformly random axis perpendicular to it.
pub fn tilt<R: Rng + ?Sized>(rng: &mut R, v: UnitVec3, angle: f64) -> UnitVec3 {
    let spin: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    if angle == 0.0 {
        return v;
    }
    let e1 = perpendicular(v);
    let e2 = v.as_vec().cross(e1.as_vec());
    let axis = e1.as_vec() * spin.cos() + e2 * spin.sin();
    let axis = UnitVec3::new_normalize(axis).expect("unit combination of orthonormal axes");
    RigidTransform::from_axis_angle(axis, angle).transform_direction(v)
}

/// Standard deviation of a zero-mean Gaussian whose absolute value has mean `mae`.
pub fn sigma_for_folded_mean(mae: f64) -> f64 {
    mae * (std::f64::consts::PI / 2.0).sqrt()
}

/// Per-axis standard deviation of an isotropic 3-D Gaussian with RMS norm `rmse`.
pub fn sigma_for_rms_norm(rmse: f64) -> f64 {
    rmse / 3f64.sqrt()
}
