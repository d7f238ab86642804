use nalgebra::Matrix2;
use rayon::prelude::*;

use super::camera::Camera;
use super::project::{projection_jacobian, ProjectedGaussian};
use super::raster::{composite, footprints, prepare, tile_pixels, Contribution};
use super::sh;
use crate::buffer::Image;
use crate::error::{Error, Result};
use crate::splat::{GlobalGaussian, GlobalGrad};
use crate::{Mat3, Vec3};

/// Loss gradients with respect to each rendered buffer. `None` means zero.
#[derive(Clone, Debug, Default)]
pub struct OutputGrads {
    pub color: Option<Image>,
    pub depth: Option<Image>,
    pub normal: Option<Image>,
    pub alpha: Option<Image>,
}

impl OutputGrads {
    fn check(&self, cam: &Camera) -> Result<()> {
        let check = |img: &Option<Image>, ch: usize| -> Result<()> {
            match img {
                Some(i) if i.width != cam.width || i.height != cam.height || i.channels != ch => {
                    Err(Error::DimensionMismatch {
                        expected: format!("{}x{}x{}", cam.width, cam.height, ch),
                        got: i.shape_string(),
                    })
                }
                _ => Ok(()),
            }
        };
        check(&self.color, 3)?;
        check(&self.depth, 1)?;
        check(&self.normal, 3)?;
        check(&self.alpha, 1)
    }
}

// Screen-space gradient layout per splat.
const MEAN: usize = 0;
const CONIC: usize = 2;
const OPACITY: usize = 5;
const COLOR: usize = 6;
const DEPTH: usize = 9;
const NORMAL: usize = 10;
const WIDTH: usize = 13;

type Grad2d = [f64; WIDTH];

fn pick(img: &Option<Image>, i: usize, ch: usize) -> [f64; 3] {
    let mut out = [0.0; 3];
    if let Some(img) = img {
        out[..ch].copy_from_slice(&img.data[ch * i..ch * i + ch]);
    }
    out
}

/// Reverse pass through one pixel's contributions.
#[allow(clippy::too_many_arguments)]
fn pixel_backward(
    rec: &[Contribution],
    list: &[u32],
    splats: &[ProjectedGaussian],
    background: &[f64; 3],
    final_t: f64,
    d_color: [f64; 3],
    d_depth: f64,
    d_normal: [f64; 3],
    d_alpha: f64,
    local: &mut [Grad2d],
) {
    let mut acc_c = [0.0; 3];
    for ch in 0..3 {
        acc_c[ch] = final_t * background[ch];
    }
    let mut acc_d = 0.0;
    let mut acc_n = [0.0; 3];
    for c in rec.iter().rev() {
        let s = &splats[list[c.slot as usize] as usize];
        let g = &mut local[c.slot as usize];
        let t = c.transmittance;
        let w = t * c.alpha;
        let inv = 1.0 / (1.0 - c.alpha);
        let mut d_a = d_alpha * final_t * inv;
        for ch in 0..3 {
            g[COLOR + ch] += w * d_color[ch];
            g[NORMAL + ch] += w * d_normal[ch];
            d_a += d_color[ch] * (t * s.color[ch] - acc_c[ch] * inv);
            d_a += d_normal[ch] * (t * s.normal[ch] - acc_n[ch] * inv);
            acc_c[ch] += w * s.color[ch];
            acc_n[ch] += w * s.normal[ch];
        }
        g[DEPTH] += w * d_depth;
        d_a += d_depth * (t * s.depth - acc_d * inv);
        acc_d += w * s.depth;
        if c.clamped {
            continue;
        }
        g[OPACITY] += d_a * c.falloff;
        // alpha = o exp(-power / 2)
        let d_pow = -0.5 * c.alpha * d_a;
        let [ca, cb, cc] = s.conic;
        let (dx, dy) = (c.dx, c.dy);
        g[MEAN] += d_pow * -2.0 * (ca * dx + cb * dy);
        g[MEAN + 1] += d_pow * -2.0 * (cb * dx + cc * dy);
        g[CONIC] += d_pow * dx * dx;
        g[CONIC + 1] += d_pow * 2.0 * dx * dy;
        g[CONIC + 2] += d_pow * dy * dy;
    }
}

/// Chains screen-space gradients of one splat back to its world parameters.
fn chain_to_world(g: &GlobalGaussian, s: &ProjectedGaussian, d: &Grad2d, cam: &Camera) -> GlobalGrad {
    let mut out = GlobalGrad {
        opacity: d[OPACITY],
        normal: Vec3::new(d[NORMAL], d[NORMAL + 1], d[NORMAL + 2]),
        ..GlobalGrad::default()
    };
    let mut d_mean = Vec3::zeros();

    // colour through spherical harmonics
    let mut d_col = [d[COLOR], d[COLOR + 1], d[COLOR + 2]];
    for ch in 0..3 {
        if s.color_clamped[ch] {
            d_col[ch] = 0.0;
        }
    }
    let view = g.mean - cam.position();
    let dist = view.norm();
    let dir = view / dist;
    let basis = sh::basis(&dir, g.sh_degree);
    let grads = sh::basis_gradient(&dir, g.sh_degree);
    let mut d_dir = Vec3::zeros();
    for k in 0..16 {
        let mut weighted = 0.0;
        for ch in 0..3 {
            out.sh[k][ch] = basis[k] * d_col[ch];
            weighted += g.sh[k][ch] * d_col[ch];
        }
        d_dir += grads[k] * weighted;
    }
    d_mean += (d_dir - dir * dir.dot(&d_dir)) / dist;

    // conic -> 2D covariance
    let conic = Matrix2::new(s.conic[0], s.conic[1], s.conic[1], s.conic[2]);
    let d_conic = Matrix2::new(d[CONIC], 0.5 * d[CONIC + 1], 0.5 * d[CONIC + 1], d[CONIC + 2]);
    let d_cov2 = -(conic * d_conic * conic);

    // 2D covariance -> 3D covariance and the projection Jacobian
    let t = cam.to_camera(&g.mean);
    let (j, clamped) = projection_jacobian(cam, &t);
    let m = j * cam.rotation;
    let cov3 = g.covariance();
    let d_cov3: Mat3 = m.transpose() * d_cov2 * m;
    let d_m = 2.0 * d_cov2 * m * cov3;
    let d_j = d_m * cam.rotation.transpose();

    let mut d_t = Vec3::zeros();
    let tz = t.z;
    let (fx, fy) = (cam.fx, cam.fy);
    d_t.z += -d_j[(0, 0)] * fx / (tz * tz) - d_j[(1, 1)] * fy / (tz * tz);
    if clamped[0] {
        d_t.z += d_j[(0, 2)] * (-j[(0, 2)] / tz);
    } else {
        d_t.x += d_j[(0, 2)] * -fx / (tz * tz);
        d_t.z += d_j[(0, 2)] * 2.0 * fx * t.x / (tz * tz * tz);
    }
    if clamped[1] {
        d_t.z += d_j[(1, 2)] * (-j[(1, 2)] / tz);
    } else {
        d_t.y += d_j[(1, 2)] * -fy / (tz * tz);
        d_t.z += d_j[(1, 2)] * 2.0 * fy * t.y / (tz * tz * tz);
    }

    // projected mean and depth
    let (du, dv) = (d[MEAN], d[MEAN + 1]);
    d_t.x += du * fx / tz;
    d_t.y += dv * fy / tz;
    d_t.z += -du * fx * t.x / (tz * tz) - dv * fy * t.y / (tz * tz) + d[DEPTH];
    d_mean += cam.rotation.transpose() * d_t;
    out.mean = d_mean;

    // covariance = (R S)(R S)^T
    let rs = g.rotation * Mat3::from_diagonal(&g.scale);
    let d_rs = 2.0 * d_cov3 * rs;
    for col in 0..3 {
        for row in 0..3 {
            out.rotation[(row, col)] = d_rs[(row, col)] * g.scale[col];
            out.scale[col] += d_rs[(row, col)] * g.rotation[(row, col)];
        }
    }
    out
}

/// Gradients of a loss with respect to every input Gaussian, given the loss
/// gradients of the buffers produced by [`rasterize`](super::rasterize).
///
/// Per-tile partial sums are reduced in tile order, so the result does not
/// depend on thread scheduling.
pub fn backward(
    gaussians: &[GlobalGaussian],
    cam: &Camera,
    background: [f64; 3],
    grads: &OutputGrads,
) -> Result<Vec<GlobalGrad>> {
    grads.check(cam)?;
    let prep = prepare(gaussians, cam);
    let partials: Vec<Vec<Grad2d>> = prep
        .tiles
        .par_iter()
        .enumerate()
        .map(|(ti, list)| {
            let mut local = vec![[0.0; WIDTH]; list.len()];
            if list.is_empty() {
                return local;
            }
            let fp = footprints(list, &prep.splats);
            let mut rec = Vec::new();
            for (x, y) in tile_pixels(ti, prep.tiles_x, cam) {
                rec.clear();
                let p = composite(x, y, list, &fp, &prep.splats, &background, Some(&mut rec));
                if rec.is_empty() {
                    continue;
                }
                let i = y * cam.width + x;
                pixel_backward(
                    &rec,
                    list,
                    &prep.splats,
                    &background,
                    p.transmittance,
                    pick(&grads.color, i, 3),
                    pick(&grads.depth, i, 1)[0],
                    pick(&grads.normal, i, 3),
                    pick(&grads.alpha, i, 1)[0],
                    &mut local,
                );
            }
            local
        })
        .collect();

    let mut screen = vec![[0.0; WIDTH]; prep.splats.len()];
    for (list, local) in prep.tiles.iter().zip(&partials) {
        for (&k, g) in list.iter().zip(local) {
            for (a, b) in screen[k as usize].iter_mut().zip(g) {
                *a += b;
            }
        }
    }
    let chained: Vec<(usize, GlobalGrad)> = prep
        .splats
        .par_iter()
        .zip(&screen)
        .map(|(s, d)| (s.index, chain_to_world(&gaussians[s.index], s, d, cam)))
        .collect();
    let mut out = vec![GlobalGrad::default(); gaussians.len()];
    for (i, g) in chained {
        out[i] = g;
    }
    Ok(out)
}
