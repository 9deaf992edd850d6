//! Distance and weight primitives.
//!
//! Angles are in degrees throughout. The quaternion angle is the angle between
//! two quaternions taken as 4-vectors, which is half the 3D rotation angle
//! between the orientations they represent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ContextMode, ErrorParams, WristState};

/// Tolerance on `|q| - 1` for a quaternion to count as unit-norm.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("non-unit quaternion (norm {0})")]
    NonUnitQuaternion(f64),
}

/// Orientation quaternion stored as (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation of `angle_deg` about `axis` (need not be normalised).
    pub fn from_axis_angle(axis: [f64; 3], angle_deg: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let half = angle_deg.to_radians() / 2.0;
        let s = half.sin() / n;
        Self::new(half.cos(), axis[0] * s, axis[1] * s, axis[2] * s)
    }

    /// Intrinsic z-y-x (yaw, pitch, roll) Euler angles in degrees.
    pub fn from_euler_zyx(yaw_deg: f64, pitch_deg: f64, roll_deg: f64) -> Self {
        let yaw = Self::from_axis_angle([0.0, 0.0, 1.0], yaw_deg);
        let pitch = Self::from_axis_angle([0.0, 1.0, 0.0], pitch_deg);
        let roll = Self::from_axis_angle([1.0, 0.0, 0.0], roll_deg);
        yaw.mul(&pitch).mul(&roll)
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Quaternion) -> Self {
        let (a, b) = (self, rhs);
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }

    /// Spherical linear interpolation along the shorter arc, `t` in [0, 1].
    pub fn slerp(&self, other: &Quaternion, t: f64) -> Self {
        let mut end = *other;
        let mut cos = self.dot(other);
        if cos < 0.0 {
            end = end.neg();
            cos = -cos;
        }
        if cos > 0.9995 {
            let lerp = Self::new(
                self.w + t * (end.w - self.w),
                self.x + t * (end.x - self.x),
                self.y + t * (end.y - self.y),
                self.z + t * (end.z - self.z),
            );
            return lerp.normalized();
        }
        let omega = cos.acos();
        let sin = omega.sin();
        let s0 = ((1.0 - t) * omega).sin() / sin;
        let s1 = (t * omega).sin() / sin;
        Self::new(
            s0 * self.w + s1 * end.w,
            s0 * self.x + s1 * end.x,
            s0 * self.y + s1 * end.y,
            s0 * self.z + s1 * end.z,
        )
        .normalized()
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

/// How the sign ambiguity of quaternions (q and -q encode the same rotation)
/// is treated when measuring angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleConvention {
    /// `acos(|<q1,q2>|)`: q and -q are at distance zero. Range [0, 90].
    #[default]
    Absolute,
    /// `acos(<q1,q2>)` exactly as the formula is written. Range [0, 180].
    Literal,
}

pub fn euclidean_distance(p1: &[f64; 3], p2: &[f64; 3]) -> f64 {
    let dx = p1[0] - p2[0];
    let dy = p1[1] - p2[1];
    let dz = p1[2] - p2[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Angle in degrees between two unit quaternions.
pub fn quaternion_angle(q1: &Quaternion, q2: &Quaternion, convention: AngleConvention) -> Result<f64, GeometryError> {
    for q in [q1, q2] {
        if !q.is_unit() {
            return Err(GeometryError::NonUnitQuaternion(q.norm()));
        }
    }
    Ok(angle_unchecked(q1, q2, convention))
}

/// Same as [`quaternion_angle`] without the unit-norm check. The norms are
/// still divided out, so slightly non-unit input is harmless.
pub(crate) fn angle_unchecked(q1: &Quaternion, q2: &Quaternion, convention: AngleConvention) -> f64 {
    let mut cos = q1.dot(q2) / (q1.norm() * q2.norm());
    if convention == AngleConvention::Absolute {
        cos = cos.abs();
    }
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

/// `exp(-alpha d^2)` inside the position cutoff, exactly zero beyond it.
pub fn position_weight(d: f64, params: &ErrorParams) -> f64 {
    if d <= params.delta {
        (-params.alpha * d * d).exp()
    } else {
        0.0
    }
}

/// `exp(-beta theta^2)` inside the rotation cutoff, exactly zero beyond it.
pub fn rotation_weight(theta: f64, params: &ErrorParams) -> f64 {
    if theta <= params.phi {
        (-params.beta * theta * theta).exp()
    } else {
        0.0
    }
}

/// Relevance of training state `s` to query state `x`.
pub fn combined_weight(x: &WristState, s: &WristState, params: &ErrorParams) -> f64 {
    let theta = angle_unchecked(&x.orientation, &s.orientation, params.angle_convention);
    let w_rot = rotation_weight(theta, params);
    match params.mode {
        ContextMode::RotationOnly => w_rot,
        ContextMode::PositionAndRotation => {
            if w_rot == 0.0 {
                return 0.0;
            }
            let d = euclidean_distance(&x.position, &s.position);
            position_weight(d, params) * w_rot
        }
    }
}
