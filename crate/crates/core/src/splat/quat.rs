//! Quaternion helpers. Quaternions are stored raw as `[w, x, y, z]` and
//! normalised whenever they are read.

use crate::Mat3;

pub const IDENTITY: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

pub fn normalize(q: [f64; 4]) -> [f64; 4] {
    let n = norm(q);
    if n > 0.0 {
        [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
    } else {
        IDENTITY
    }
}

#[inline]
pub fn norm(q: [f64; 4]) -> f64 {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
}

/// Rotation matrix of the normalised quaternion.
pub fn to_matrix(q: [f64; 4]) -> Mat3 {
    let [w, x, y, z] = normalize(q);
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Pulls a gradient with respect to the rotation matrix back to the raw
/// (unnormalised) quaternion.
pub fn matrix_backward(q: [f64; 4], grad: &Mat3) -> [f64; 4] {
    let n = norm(q);
    if n == 0.0 {
        return [0.0; 4];
    }
    let [w, x, y, z] = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
    let g = |r: usize, c: usize| grad[(r, c)];
    let dw = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    let dx = 2.0
        * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0)
            + w * g(2, 1)
            - 2.0 * x * g(2, 2));
    let dy = 2.0
        * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0)
            + z * g(2, 1)
            - 2.0 * y * g(2, 2));
    let dz = 2.0
        * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1)
            + y * g(1, 2)
            + x * g(2, 0)
            + y * g(2, 1));
    let dot = w * dw + x * dx + y * dy + z * dz;
    [
        (dw - w * dot) / n,
        (dx - x * dot) / n,
        (dy - y * dot) / n,
        (dz - z * dot) / n,
    ]
}

/// Quaternion of a rotation matrix (Shepperd's method).
pub fn from_matrix(m: &Mat3) -> [f64; 4] {
    let r = nalgebra::Rotation3::from_matrix_unchecked(*m);
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&r);
    [q.w, q.i, q.j, q.k]
}
