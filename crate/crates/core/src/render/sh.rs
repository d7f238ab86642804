//! Real spherical harmonics up to degree 3.
//!
//! Basis ordering and signs follow the convention used by common splatting
//! checkpoints, so coefficients exported elsewhere evaluate identically.

use crate::splat::{sh_coeff_count, ShCoeffs};
use crate::Vec3;

pub const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Basis values at a unit direction. Entries past `(degree + 1)^2` are zero.
pub fn basis(dir: &Vec3, degree: u8) -> [f64; 16] {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let mut b = [0.0; 16];
    b[0] = C0;
    if degree >= 1 {
        b[1] = -C1 * y;
        b[2] = C1 * z;
        b[3] = -C1 * x;
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b[4] = C2[0] * x * y;
        b[5] = C2[1] * y * z;
        b[6] = C2[2] * (2.0 * zz - xx - yy);
        b[7] = C2[3] * x * z;
        b[8] = C2[4] * (xx - yy);
        if degree >= 3 {
            b[9] = C3[0] * y * (3.0 * xx - yy);
            b[10] = C3[1] * x * y * z;
            b[11] = C3[2] * y * (4.0 * zz - xx - yy);
            b[12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
            b[13] = C3[4] * x * (4.0 * zz - xx - yy);
            b[14] = C3[5] * z * (xx - yy);
            b[15] = C3[6] * x * (xx - 3.0 * yy);
        }
    }
    b
}

/// Partial derivatives of each basis polynomial with respect to `(x, y, z)`,
/// treating the components as independent.
pub fn basis_gradient(dir: &Vec3, degree: u8) -> [Vec3; 16] {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let mut g = [Vec3::zeros(); 16];
    if degree >= 1 {
        g[1] = Vec3::new(0.0, -C1, 0.0);
        g[2] = Vec3::new(0.0, 0.0, C1);
        g[3] = Vec3::new(-C1, 0.0, 0.0);
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        g[4] = Vec3::new(y, x, 0.0) * C2[0];
        g[5] = Vec3::new(0.0, z, y) * C2[1];
        g[6] = Vec3::new(-2.0 * x, -2.0 * y, 4.0 * z) * C2[2];
        g[7] = Vec3::new(z, 0.0, x) * C2[3];
        g[8] = Vec3::new(2.0 * x, -2.0 * y, 0.0) * C2[4];
        if degree >= 3 {
            g[9] = Vec3::new(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0) * C3[0];
            g[10] = Vec3::new(y * z, x * z, x * y) * C3[1];
            g[11] = Vec3::new(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z) * C3[2];
            g[12] = Vec3::new(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy) * C3[3];
            g[13] = Vec3::new(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z) * C3[4];
            g[14] = Vec3::new(2.0 * x * z, -2.0 * y * z, xx - yy) * C3[5];
            g[15] = Vec3::new(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0) * C3[6];
        }
    }
    g
}

/// Linear SH response plus the 0.5 offset, before clamping.
pub fn eval_sh_unclamped(coeffs: &ShCoeffs, dir: &Vec3, degree: u8) -> [f64; 3] {
    let b = basis(dir, degree);
    let mut rgb = [0.5; 3];
    for (k, c) in coeffs.iter().take(sh_coeff_count(degree)).enumerate() {
        for ch in 0..3 {
            rgb[ch] += b[k] * c[ch];
        }
    }
    rgb
}

/// View-dependent colour, clamped below at zero.
pub fn eval_sh(coeffs: &ShCoeffs, dir: &Vec3, degree: u8) -> [f64; 3] {
    eval_sh_unclamped(coeffs, dir, degree).map(|v| v.max(0.0))
}

/// DC coefficient that produces colour `rgb` on its own.
pub fn rgb_to_dc(rgb: f64) -> f64 {
    (rgb - 0.5) / C0
}
