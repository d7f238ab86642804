use rayon::prelude::*;

use super::camera::Camera;
use super::project::{project_indexed, ProjectedGaussian, CUTOFF_SIGMA};
use crate::buffer::Image;
use crate::splat::GlobalGaussian;

pub const TILE_SIZE: usize = 16;
/// Per-splat alpha is clamped to this.
pub const ALPHA_MAX: f64 = 0.99;
/// Splat contributions below this alpha are skipped.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
/// Compositing at a pixel stops once transmittance falls below this.
pub const TRANSMITTANCE_MIN: f64 = 1e-4;

const CUTOFF_POWER: f64 = CUTOFF_SIGMA * CUTOFF_SIGMA;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    /// RGB composited over the background.
    pub color: Image,
    /// Alpha-weighted camera-space depth (not normalised by coverage).
    pub depth: Image,
    /// Alpha-weighted world-space normals (not normalised by coverage).
    pub normal: Image,
    /// Accumulated opacity `Σ T_i α_i`.
    pub alpha: Image,
}

/// Projected splats in compositing order plus per-tile lists.
pub(crate) struct Prepared {
    pub splats: Vec<ProjectedGaussian>,
    pub tiles: Vec<Vec<u32>>,
    pub tiles_x: usize,
    pub tiles_y: usize,
}

pub(crate) fn prepare(gaussians: &[GlobalGaussian], cam: &Camera) -> Prepared {
    let mut splats: Vec<ProjectedGaussian> = gaussians
        .par_iter()
        .enumerate()
        .filter_map(|(i, g)| project_indexed(i, g, cam))
        .collect();
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    let tiles_x = cam.width.div_ceil(TILE_SIZE);
    let tiles_y = cam.height.div_ceil(TILE_SIZE);
    let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
    for (k, s) in splats.iter().enumerate() {
        let [x0, x1, y0, y1] = s.rect;
        for ty in y0 / TILE_SIZE..=y1 / TILE_SIZE {
            for tx in x0 / TILE_SIZE..=x1 / TILE_SIZE {
                tiles[ty * tiles_x + tx].push(k as u32);
            }
        }
    }
    Prepared {
        splats,
        tiles,
        tiles_x,
        tiles_y,
    }
}

/// One splat's contribution at a pixel, as needed by the backward pass.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Contribution {
    /// Position in the tile list.
    pub slot: u32,
    pub alpha: f64,
    /// Unclamped Gaussian falloff `exp(-power / 2)`.
    pub falloff: f64,
    /// Transmittance before this splat.
    pub transmittance: f64,
    pub clamped: bool,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct PixelValue {
    pub color: [f64; 3],
    pub depth: f64,
    pub normal: [f64; 3],
    pub alpha: f64,
    pub transmittance: f64,
}

/// The part of a splat needed to test a pixel, packed for the inner loop.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Footprint {
    rect: [u32; 4],
    mean2d: [f64; 2],
    conic: [f64; 3],
    opacity: f64,
}

pub(crate) fn footprints(list: &[u32], splats: &[ProjectedGaussian]) -> Vec<Footprint> {
    list.iter()
        .map(|&k| {
            let s = &splats[k as usize];
            Footprint {
                rect: s.rect.map(|v| v.min(u32::MAX as usize) as u32),
                mean2d: s.mean2d,
                conic: s.conic,
                opacity: s.opacity,
            }
        })
        .collect()
}

/// Composites the tile list at one pixel, optionally recording contributions.
/// `fp` holds the footprints of `list`, in the same order.
pub(crate) fn composite(
    px: usize,
    py: usize,
    list: &[u32],
    fp: &[Footprint],
    splats: &[ProjectedGaussian],
    background: &[f64; 3],
    mut record: Option<&mut Vec<Contribution>>,
) -> PixelValue {
    let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
    let (pxu, pyu) = (px as u32, py as u32);
    let mut out = PixelValue::default();
    let mut t = 1.0;
    for (slot, s) in fp.iter().enumerate() {
        let [x0, x1, y0, y1] = s.rect;
        if pxu < x0 || pxu > x1 || pyu < y0 || pyu > y1 {
            continue;
        }
        let dx = x - s.mean2d[0];
        let dy = y - s.mean2d[1];
        let [ca, cb, cc] = s.conic;
        let power = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy;
        if !(power <= CUTOFF_POWER) {
            continue;
        }
        let falloff = (-0.5 * power).exp();
        let raw = s.opacity * falloff;
        let clamped = raw > ALPHA_MAX;
        let alpha = if clamped { ALPHA_MAX } else { raw };
        if alpha < ALPHA_MIN {
            continue;
        }
        let s = &splats[list[slot] as usize];
        let w = t * alpha;
        for ch in 0..3 {
            out.color[ch] += w * s.color[ch];
            out.normal[ch] += w * s.normal[ch];
        }
        out.depth += w * s.depth;
        out.alpha += w;
        if let Some(rec) = record.as_deref_mut() {
            rec.push(Contribution {
                slot: slot as u32,
                alpha,
                falloff,
                transmittance: t,
                clamped,
                dx,
                dy,
            });
        }
        t *= 1.0 - alpha;
        if t < TRANSMITTANCE_MIN {
            break;
        }
    }
    for ch in 0..3 {
        out.color[ch] += t * background[ch];
    }
    out.transmittance = t;
    out
}

/// Pixel coordinates covered by a tile.
pub(crate) fn tile_pixels(tile: usize, tiles_x: usize, cam: &Camera) -> impl Iterator<Item = (usize, usize)> {
    let (tx, ty) = (tile % tiles_x, tile / tiles_x);
    let (x0, y0) = (tx * TILE_SIZE, ty * TILE_SIZE);
    let (x1, y1) = ((x0 + TILE_SIZE).min(cam.width), (y0 + TILE_SIZE).min(cam.height));
    (y0..y1).flat_map(move |y| (x0..x1).map(move |x| (x, y)))
}

/// Renders colour, depth, normal and alpha buffers.
///
/// The result does not depend on the number of worker threads: every pixel
/// is composited independently in a fixed front-to-back order.
pub fn rasterize(gaussians: &[GlobalGaussian], cam: &Camera, background: [f64; 3]) -> RenderOutput {
    let prep = prepare(gaussians, cam);
    let tiles: Vec<Vec<(usize, usize, PixelValue)>> = prep
        .tiles
        .par_iter()
        .enumerate()
        .map(|(i, list)| {
            let fp = footprints(list, &prep.splats);
            tile_pixels(i, prep.tiles_x, cam)
                .map(|(x, y)| (x, y, composite(x, y, list, &fp, &prep.splats, &background, None)))
                .collect()
        })
        .collect();
    debug_assert_eq!(tiles.len(), prep.tiles_x * prep.tiles_y);
    let (w, h) = (cam.width, cam.height);
    let mut out = RenderOutput {
        color: Image::new(w, h, 3),
        depth: Image::new(w, h, 1),
        normal: Image::new(w, h, 3),
        alpha: Image::new(w, h, 1),
    };
    for (x, y, p) in tiles.into_iter().flatten() {
        let i = y * w + x;
        out.color.data[3 * i..3 * i + 3].copy_from_slice(&p.color);
        out.normal.data[3 * i..3 * i + 3].copy_from_slice(&p.normal);
        out.depth.data[i] = p.depth;
        out.alpha.data[i] = p.alpha;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Mat3, Vec3};

    fn cam(n: usize) -> Camera {
        Camera::new(n, n, 40.0, 40.0, n as f64 / 2.0, n as f64 / 2.0, Mat3::identity(), Vec3::zeros()).unwrap()
    }

    fn splat(mean: Vec3, sigma: f64, opacity: f64, rgb: [f64; 3]) -> GlobalGaussian {
        let mut sh = [[0.0; 3]; 16];
        sh[0] = rgb.map(super::super::sh::rgb_to_dc);
        GlobalGaussian {
            mean,
            rotation: Mat3::identity(),
            scale: Vec3::repeat(sigma),
            opacity,
            sh,
            sh_degree: 0,
            normal: Vec3::new(0.0, 0.0, -1.0),
        }
    }

    #[test]
    fn empty_scene_is_background() {
        let bg = [0.2, 0.4, 0.9];
        let out = rasterize(&[], &cam(20), bg);
        for p in out.color.data.chunks(3) {
            assert_eq!(p, &bg);
        }
        assert!(out.alpha.data.iter().all(|&a| a == 0.0));
        assert!(out.depth.data.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn single_splat_blend() {
        let bg = [1.0, 1.0, 1.0];
        let c = [0.9, 0.1, 0.3];
        let out = rasterize(&[splat(Vec3::new(0.0, 0.0, 2.0), 0.2, 0.8, c)], &cam(32), bg);
        // the pixel nearest the centre
        let a = out.alpha.at(16, 16, 0);
        assert!(a > 0.5);
        for ch in 0..3 {
            let expect = a * c[ch] + (1.0 - a) * bg[ch];
            assert!((out.color.at(16, 16, ch) - expect).abs() < 1e-12);
        }
        assert!((out.depth.at(16, 16, 0) - a * 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_splat_blend_order() {
        let bg = [0.0, 0.5, 1.0];
        let (c1, c2) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let front = splat(Vec3::new(0.0, 0.0, 2.0), 0.2, 0.6, c1);
        let back = splat(Vec3::new(0.0, 0.0, 3.0), 0.3, 0.7, c2);
        // input order must not matter, only depth
        let a = rasterize(&[back.clone(), front.clone()], &cam(32), bg);
        let b = rasterize(&[front.clone(), back.clone()], &cam(32), bg);
        assert_eq!(a.color, b.color);
        let single_front = rasterize(&[front], &cam(32), bg).alpha.at(16, 16, 0);
        let single_back = rasterize(&[back], &cam(32), bg).alpha.at(16, 16, 0);
        for ch in 0..3 {
            let expect = single_front * c1[ch]
                + (1.0 - single_front) * single_back * c2[ch]
                + (1.0 - single_front) * (1.0 - single_back) * bg[ch];
            assert!((a.color.at(16, 16, ch) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_ties_break_by_index() {
        let bg = [0.0; 3];
        let g1 = splat(Vec3::new(0.0, 0.0, 2.0), 0.2, 0.6, [1.0, 0.0, 0.0]);
        let g2 = splat(Vec3::new(0.0, 0.0, 2.0), 0.2, 0.6, [0.0, 0.0, 1.0]);
        let out = rasterize(&[g1, g2], &cam(16), bg);
        // red is composited first, so it dominates
        assert!(out.color.at(8, 8, 0) > out.color.at(8, 8, 2));
    }

    #[test]
    fn zero_opacity_is_background() {
        let bg = [0.3, 0.6, 0.1];
        let gs: Vec<_> = (0..10)
            .map(|i| splat(Vec3::new(0.1 * i as f64 - 0.5, 0.0, 2.0), 0.2, 1e-9, [1.0, 1.0, 1.0]))
            .collect();
        let out = rasterize(&gs, &cam(24), bg);
        for p in out.color.data.chunks(3) {
            assert_eq!(p, &bg);
        }
    }

    #[test]
    fn alpha_bounded_and_transmittance_monotone() {
        let gs: Vec<_> = (0..40)
            .map(|i| {
                let f = i as f64;
                splat(
                    Vec3::new((f * 0.37).sin() * 0.4, (f * 0.71).cos() * 0.4, 1.5 + 0.05 * f),
                    0.05 + 0.01 * (i % 7) as f64,
                    0.999,
                    [0.5; 3],
                )
            })
            .collect();
        let c = cam(48);
        let prep = prepare(&gs, &c);
        for (i, list) in prep.tiles.iter().enumerate() {
            for (x, y) in tile_pixels(i, prep.tiles_x, &c) {
                let mut rec = Vec::new();
                let p = composite(x, y, list, &footprints(list, &prep.splats), &prep.splats, &[0.0; 3], Some(&mut rec));
                assert!(p.alpha >= 0.0 && p.alpha <= 1.0);
                for w in rec.windows(2) {
                    assert!(w[1].transmittance <= w[0].transmittance);
                }
            }
        }
    }
}
