//! Rotation-matrix oracles shared by the integration tests. None of this
//! goes through the library's quaternion arithmetic.

#![allow(dead_code)]

use rand::{Rng, RngCore};
use reid_lab::motion::{UnitQuat, Vec3};

pub type Mat3 = [[f64; 3]; 3];

pub fn quat_to_matrix(q: UnitQuat) -> Mat3 {
    let [w, x, y, z] = q.to_array();
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat_vec(a: &Mat3, v: Vec3) -> Vec3 {
    let v = v.to_array();
    let r = |i: usize| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    Vec3::new(r(0), r(1), r(2))
}

/// Rotation of `angle` about unit `axis` (Rodrigues).
pub fn axis_angle_matrix(axis: [f64; 3], angle: f64) -> Mat3 {
    let [x, y, z] = axis;
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

/// Rotation angle in `[0, π]`, computed with `atan2` so small angles keep
/// full precision.
pub fn rotation_angle(r: &Mat3) -> f64 {
    let v = [r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]];
    let sin2 = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let cos2 = r[0][0] + r[1][1] + r[2][2] - 1.0;
    sin2.atan2(cos2)
}

/// Axis and angle of a rotation matrix.
pub fn matrix_axis_angle(r: &Mat3) -> ([f64; 3], f64) {
    let angle = rotation_angle(r);
    let v = [r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]];
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if angle < 1e-300 {
        return ([1.0, 0.0, 0.0], 0.0);
    }
    if angle < 3.0 {
        return ([v[0] / n, v[1] / n, v[2] / n], angle);
    }
    // Near a half turn the skew part vanishes; read the axis from the
    // symmetric part (R + Rᵀ)/2 − cos θ I = (1 − cos θ) n nᵀ.
    let c = angle.cos();
    let s: Mat3 = std::array::from_fn(|i| {
        std::array::from_fn(|j| (r[i][j] + r[j][i]) / 2.0 - if i == j { c } else { 0.0 })
    });
    let k = (0..3).max_by(|&a, &b| s[a][a].total_cmp(&s[b][b])).unwrap();
    let col = [s[0][k], s[1][k], s[2][k]];
    let len = (col[0] * col[0] + col[1] * col[1] + col[2] * col[2]).sqrt();
    let mut axis = [col[0] / len, col[1] / len, col[2] / len];
    if axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2] < 0.0 {
        axis = axis.map(|a| -a);
    }
    (axis, angle)
}

/// Angle between two rotations.
pub fn rotation_distance(a: &Mat3, b: &Mat3) -> f64 {
    rotation_angle(&mat_mul(&transpose(a), b))
}

pub fn random_quat<R: RngCore>(rng: &mut R) -> UnitQuat {
    loop {
        let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return UnitQuat::normalize(c[0], c[1], c[2], c[3]).unwrap();
        }
    }
}

pub fn random_vec<R: RngCore>(rng: &mut R, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

/// Rotation about the vertical (y) axis.
pub fn yaw_matrix(yaw: f64) -> Mat3 {
    axis_angle_matrix([0.0, 1.0, 0.0], yaw)
}
