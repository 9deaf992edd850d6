//! Reference implementations used by the integration tests. They are written
//! from the formulas directly and share no code with the library.
#![allow(dead_code)]

use grasp_sentinel::{ContextMode, ErrorParams, Quaternion, WristState};
use rand::Rng;

/// Plain left-to-right weighted mean, or `None` below `n_min` neighbours.
pub fn brute_force_error(x: &WristState, training: &[WristState], p: &ErrorParams) -> (Option<f64>, usize) {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut count = 0;
    for s in training {
        let dx = x.position[0] - s.position[0];
        let dy = x.position[1] - s.position[1];
        let dz = x.position[2] - s.position[2];
        let d = (dx * dx + dy * dy + dz * dz).sqrt();

        let (a, b) = (x.orientation, s.orientation);
        let na = (a.w * a.w + a.x * a.x + a.y * a.y + a.z * a.z).sqrt();
        let nb = (b.w * b.w + b.x * b.x + b.y * b.y + b.z * b.z).sqrt();
        let cos = ((a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z) / (na * nb)).abs().min(1.0);
        let theta = cos.acos() * 180.0 / std::f64::consts::PI;

        let w_rot = if theta <= p.phi { (-p.beta * theta * theta).exp() } else { 0.0 };
        let w_pos = if d <= p.delta { (-p.alpha * d * d).exp() } else { 0.0 };
        let w = match p.mode {
            ContextMode::PositionAndRotation => w_pos * w_rot,
            ContextMode::RotationOnly => w_rot,
        };
        if w > 0.0 {
            let mut sq = 0.0;
            for (u, v) in x.activation.iter().zip(&s.activation) {
                sq += (u - v) * (u - v);
            }
            num += w * sq / x.activation.len() as f64;
            den += w;
            count += 1;
        }
    }
    let error = (count >= p.n_min).then(|| num / den);
    (error, count)
}

/// 3x3 rotation matrix of a unit quaternion.
pub fn rotation_matrix(q: &Quaternion) -> [[f64; 3]; 3] {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Geodesic distance on SO(3) in degrees, from `R1^T R2`.
pub fn geodesic_deg(q1: &Quaternion, q2: &Quaternion) -> f64 {
    let (a, b) = (rotation_matrix(q1), rotation_matrix(q2));
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|m| a[m][i] * b[m][j]).sum();
        }
    }
    let trace = r[0][0] + r[1][1] + r[2][2];
    let sx = r[2][1] - r[1][2];
    let sy = r[0][2] - r[2][0];
    let sz = r[1][0] - r[0][1];
    let sin = (sx * sx + sy * sy + sz * sz).sqrt() / 2.0;
    let cos = (trace - 1.0) / 2.0;
    sin.atan2(cos).to_degrees()
}

pub fn random_unit_quaternion(rng: &mut impl Rng) -> Quaternion {
    loop {
        let q = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 0.1 && n <= 1.0 {
            return q.normalized();
        }
    }
}

/// Unit quaternion at most `max_deg` (as a 4-vector angle) from identity.
pub fn random_nearby_quaternion(rng: &mut impl Rng, max_deg: f64) -> Quaternion {
    let axis = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    // from_axis_angle takes the rotation angle, twice the 4-vector angle.
    Quaternion::from_axis_angle(axis, 2.0 * rng.random_range(0.0..max_deg))
}

/// A state scattered around the origin so that some, but not all, training
/// states fall inside the default focal area.
pub fn random_local_state(rng: &mut impl Rng, k: usize, spread: f64, max_deg: f64) -> WristState {
    WristState {
        position: [
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
        ],
        orientation: random_nearby_quaternion(rng, max_deg),
        activation: (0..k).map(|_| rng.random_range(0.0..=1.0)).collect(),
        timestamp_ms: 0.0,
    }
}
