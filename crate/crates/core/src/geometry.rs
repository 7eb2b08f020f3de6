//! Coordinate, direction, pointing-error and floor-target mathematics.
//!
//! Conventions used throughout the crate:
//!
//! * Lengths are millimeters. Angles are radians in memory and degrees in
//!   every file or command-line surface.
//! * Both the camera frame and the robot frame are right-handed with `z` up.
//!   The camera frame has `x` along the optical axis (forward), so yaw is a
//!   rotation about the camera's vertical axis and pitch is the elevation of
//!   the finger axis out of the camera's horizontal plane.
//! * Positive pitch points downward: the direction vector has a `-sin(pitch)`
//!   vertical component.
//! * The robot frame origin sits above the robot center at the camera-mount
//!   height `h`, so the floor is the plane `z = -h` in robot coordinates.
//! * Directions are mapped between frames with the rotation part of a rigid
//!   transform only. A translation has no meaning for a free vector.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for unit-norm and orthonormality checks.
pub const UNIT_TOLERANCE: f64 = 1e-9;
/// Vertical component below which a direction is treated as level.
pub const LEVEL_TOLERANCE: f64 = 1e-6;
/// Norm below which a direction vector is treated as zero.
pub const ZERO_DIRECTION_TOLERANCE: f64 = 1e-12;
/// Horizontal magnitude below which a direction has no usable yaw or floor projection.
pub const VERTICAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("pitch {pitch_deg:.6} deg is outside the open interval (-90, 90)")]
    PitchOutOfRange { pitch_deg: f64 },
    #[error("yaw {yaw_deg:.6} deg is outside [-180, 180]")]
    YawOutOfRange { yaw_deg: f64 },
    #[error("direction is parallel to the vertical axis; yaw is undefined")]
    DegenerateDirection,
    #[error("direction vector has zero length")]
    ZeroDirection,
    #[error("vector norm {norm} is not 1")]
    NotUnit { norm: f64 },
    #[error("pointing direction does not descend toward the floor (z component {z:.3e})")]
    NoFloorIntersection { z: f64 },
    #[error("finger lies at or below the floor (height above floor {height_mm:.3} mm)")]
    BelowFloor { height_mm: f64 },
    #[error("vertical pointing has no horizontal projection on the floor")]
    DegenerateProjection,
    #[error("rotation is not orthonormal with determinant +1")]
    InvalidRotation,
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_xy(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3}, {:.3})", self.x, self.y, self.z)
    }
}

/// A direction with unit Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: UnitVec3 = UnitVec3(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: UnitVec3 = UnitVec3(Vec3::new(0.0, 0.0, 1.0));

    /// Normalizes `v`. Fails on zero-length or non-finite input.
    pub fn new_normalize(v: Vec3) -> Result<Self> {
        if !v.is_finite() {
            return Err(GeometryError::NonFinite { what: "direction" });
        }
        let n = v.norm();
        if n <= ZERO_DIRECTION_TOLERANCE {
            return Err(GeometryError::ZeroDirection);
        }
        Ok(UnitVec3(v / n))
    }

    /// Accepts `v` as-is if it already has unit norm within [`UNIT_TOLERANCE`].
    pub fn try_from_unit(v: Vec3) -> Result<Self> {
        if !v.is_finite() {
            return Err(GeometryError::NonFinite { what: "direction" });
        }
        if (v.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(GeometryError::NotUnit { norm: v.norm() });
        }
        Ok(UnitVec3(v))
    }

    pub fn x(self) -> f64 {
        self.0.x
    }
    pub fn y(self) -> f64 {
        self.0.y
    }
    pub fn z(self) -> f64 {
        self.0.z
    }

    pub fn as_vec(self) -> Vec3 {
        self.0
    }
}

impl<'de> Deserialize<'de> for UnitVec3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec3::deserialize(d)?;
        UnitVec3::new_normalize(v).map_err(serde::de::Error::custom)
    }
}

/// Finger position plus pitch and yaw of the pointing direction, camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointingFeature {
    position: Vec3,
    pitch: f64,
    yaw: f64,
}

impl PointingFeature {
    /// `pitch` and `yaw` in radians.
    pub fn new(position: Vec3, pitch: f64, yaw: f64) -> Result<Self> {
        if !position.is_finite() {
            return Err(GeometryError::NonFinite { what: "finger position" });
        }
        check_pitch(pitch)?;
        if !yaw.is_finite() || yaw.abs() > std::f64::consts::PI {
            return Err(GeometryError::YawOutOfRange { yaw_deg: yaw.to_degrees() });
        }
        Ok(PointingFeature { position, pitch, yaw })
    }

    pub fn from_degrees(position: Vec3, pitch_deg: f64, yaw_deg: f64) -> Result<Self> {
        Self::new(position, pitch_deg.to_radians(), yaw_deg.to_radians())
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }
    pub fn pitch(&self) -> f64 {
        self.pitch
    }
    pub fn yaw(&self) -> f64 {
        self.yaw
    }
    pub fn pitch_deg(&self) -> f64 {
        self.pitch.to_degrees()
    }
    pub fn yaw_deg(&self) -> f64 {
        self.yaw.to_degrees()
    }

    pub fn direction(&self) -> UnitVec3 {
        // pitch was validated at construction
        direction_unchecked(self.pitch, self.yaw)
    }

    /// Builds a feature from a finger position and a pointing direction.
    pub fn from_direction(position: Vec3, direction: UnitVec3) -> Result<Self> {
        let (pitch, yaw) = angles_from_direction(direction)?;
        Self::new(position, pitch, yaw)
    }
}

fn check_pitch(pitch: f64) -> Result<()> {
    if !pitch.is_finite() || pitch.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(GeometryError::PitchOutOfRange { pitch_deg: pitch.to_degrees() });
    }
    Ok(())
}

fn direction_unchecked(pitch: f64, yaw: f64) -> UnitVec3 {
    let (sb, cb) = pitch.sin_cos();
    let (sg, cg) = yaw.sin_cos();
    UnitVec3(Vec3::new(cg * cb, sg * cb, -sb))
}

/// Unit pointing direction from pitch and yaw (radians).
pub fn direction_from_angles(pitch: f64, yaw: f64) -> Result<UnitVec3> {
    check_pitch(pitch)?;
    if !yaw.is_finite() {
        return Err(GeometryError::NonFinite { what: "yaw" });
    }
    Ok(direction_unchecked(pitch, yaw))
}

/// Inverse of [`direction_from_angles`]: returns `(pitch, yaw)` in radians,
/// yaw in `(-pi, pi]`.
pub fn angles_from_direction(v: UnitVec3) -> Result<(f64, f64)> {
    let horizontal = v.0.norm_xy();
    if horizontal < VERTICAL_TOLERANCE {
        return Err(GeometryError::DegenerateDirection);
    }
    let pitch = (-v.0.z).atan2(horizontal);
    let yaw = v.0.y.atan2(v.0.x);
    Ok((pitch, yaw))
}

type Mat3 = [[f64; 3]; 3];

const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

fn transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Rigid motion `p -> R p + t` mapping one frame's coordinates into another's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        if rotation.iter().flatten().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite { what: "rotation" });
        }
        if !translation.is_finite() {
            return Err(GeometryError::NonFinite { what: "translation" });
        }
        let rtr = mat_mul(&transpose(&rotation), &rotation);
        let orthonormal = (0..3).all(|i| (0..3).all(|j| (rtr[i][j] - IDENTITY3[i][j]).abs() <= UNIT_TOLERANCE));
        if !orthonormal || (det(&rotation) - 1.0).abs() > UNIT_TOLERANCE {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(RigidTransform { rotation, translation })
    }

    pub fn identity() -> Self {
        RigidTransform { rotation: IDENTITY3, translation: Vec3::ZERO }
    }

    pub fn from_translation(t: Vec3) -> Self {
        RigidTransform { rotation: IDENTITY3, translation: t }
    }

    /// Rotation by `angle` radians about `z`.
    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RigidTransform {
            rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            translation: Vec3::ZERO,
        }
    }

    /// Rotation by `angle` radians about `y`.
    pub fn rotation_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RigidTransform {
            rotation: [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
            translation: Vec3::ZERO,
        }
    }

    /// Rotation by `angle` radians about `x`.
    pub fn rotation_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RigidTransform {
            rotation: [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
            translation: Vec3::ZERO,
        }
    }

    /// Rotation by `angle` radians about an arbitrary axis (Rodrigues).
    pub fn from_axis_angle(axis: UnitVec3, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let k = axis.0;
        let v = 1.0 - c;
        let rotation = [
            [c + k.x * k.x * v, k.x * k.y * v - k.z * s, k.x * k.z * v + k.y * s],
            [k.y * k.x * v + k.z * s, c + k.y * k.y * v, k.y * k.z * v - k.x * s],
            [k.z * k.x * v - k.y * s, k.z * k.y * v + k.x * s, c + k.z * k.z * v],
        ];
        RigidTransform { rotation, translation: Vec3::ZERO }
    }

    pub fn with_translation(mut self, t: Vec3) -> Self {
        self.translation = t;
        self
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        mat_vec(&self.rotation, p) + self.translation
    }

    pub fn transform_direction(&self, v: UnitVec3) -> UnitVec3 {
        UnitVec3(mat_vec(&self.rotation, v.0))
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        mat_vec(&self.rotation, v)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: mat_mul(&self.rotation, &other.rotation),
            translation: mat_vec(&self.rotation, other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = transpose(&self.rotation);
        RigidTransform { translation: -mat_vec(&rt, self.translation), rotation: rt }
    }

    /// Largest absolute entry of `RᵀR - I`.
    pub fn orthonormality_defect(&self) -> f64 {
        let rtr = mat_mul(&transpose(&self.rotation), &self.rotation);
        (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| (rtr[i][j] - IDENTITY3[i][j]).abs())
            .fold(0.0, f64::max)
    }
}

pub fn transform_point(a: &RigidTransform, p: Vec3) -> Vec3 {
    a.transform_point(p)
}

/// Maps a direction with the rotation part of `a`; translation is ignored.
pub fn transform_direction(a: &RigidTransform, v: UnitVec3) -> UnitVec3 {
    a.transform_direction(v)
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn invert(a: &RigidTransform) -> RigidTransform {
    a.inverse()
}

/// Half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: UnitVec3,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction.0 * t
    }
}

/// Minimal distance between `target` and the line through `key_point` along `direction`.
pub fn pointing_error(target: Vec3, key_point: Vec3, direction: Vec3) -> Result<f64> {
    let n = direction.norm();
    if !(n > ZERO_DIRECTION_TOLERANCE) {
        return Err(GeometryError::ZeroDirection);
    }
    Ok((target - key_point).cross(direction).norm() / n)
}

/// Length along `dir` from `finger` (robot frame) down to the floor plane `z = -height`.
pub fn floor_distance(finger: Vec3, dir: UnitVec3, height: f64) -> Result<f64> {
    if !(dir.z() < -LEVEL_TOLERANCE) {
        return Err(GeometryError::NoFloorIntersection { z: dir.z() });
    }
    let above = finger.z + height;
    if !(above > 0.0) {
        return Err(GeometryError::BelowFloor { height_mm: above });
    }
    Ok(-above / dir.z())
}

/// Floor point hit by the pointing ray, robot frame.
pub fn resolve_target(finger: Vec3, dir: UnitVec3, height: f64) -> Result<Vec3> {
    let d = floor_distance(finger, dir, height)?;
    Ok(finger + dir.0 * d)
}

/// Horizontal projection of the pointing ray onto the floor, starting below the finger.
pub fn project_to_floor_line(finger: Vec3, dir: UnitVec3, height: f64) -> Result<Ray> {
    let horizontal = Vec3::new(dir.x(), dir.y(), 0.0);
    if horizontal.norm() < VERTICAL_TOLERANCE {
        return Err(GeometryError::DegenerateProjection);
    }
    Ok(Ray {
        origin: Vec3::new(finger.x, finger.y, -height),
        direction: UnitVec3(horizontal / horizontal.norm()),
    })
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_deg(a: f64) -> f64 {
    let mut w = a.rem_euclid(360.0);
    if w > 180.0 {
        w -= 360.0;
    }
    w
}

/// Wraps an angle in radians into `(-pi, pi]`.
pub fn wrap_rad(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}
