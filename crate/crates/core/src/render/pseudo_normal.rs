use super::camera::Camera;
use crate::buffer::Image;
use crate::Vec3;

/// Coverage above which a pixel counts as observed by the splats.
pub const COVERAGE_THRESHOLD: f64 = 0.5;

/// Estimates world-space normals from a rendered depth map assuming local planarity.
///
/// The composited depth is divided by coverage before back-projection, and
/// pixels whose coverage is at most `threshold` get a zero normal. Neighbours
/// to the right and below are used, falling back to the left and above at
/// uncovered or border pixels.
pub fn pseudo_normal_from_depth(depth: &Image, alpha: &Image, cam: &Camera, threshold: f64) -> Image {
    let (w, h) = (depth.width, depth.height);
    let covered = |x: usize, y: usize| alpha.at(x, y, 0) > threshold;
    let point = |x: usize, y: usize| {
        let z = depth.at(x, y, 0) / alpha.at(x, y, 0);
        cam.unproject(x as f64 + 0.5, y as f64 + 0.5, z)
    };
    let mut out = Image::new(w, h, 3);
    let to_world = cam.rotation.transpose();
    for y in 0..h {
        for x in 0..w {
            if !covered(x, y) {
                continue;
            }
            let p = point(x, y);
            let dx = if x + 1 < w && covered(x + 1, y) {
                point(x + 1, y) - p
            } else if x > 0 && covered(x - 1, y) {
                p - point(x - 1, y)
            } else {
                continue;
            };
            let dy = if y + 1 < h && covered(x, y + 1) {
                point(x, y + 1) - p
            } else if y > 0 && covered(x, y - 1) {
                p - point(x, y - 1)
            } else {
                continue;
            };
            let n: Vec3 = dy.cross(&dx);
            let len = n.norm();
            if !(len > 0.0) || !len.is_finite() {
                continue;
            }
            let nw = to_world * (n / len);
            let i = 3 * (y * w + x);
            out.data[i..i + 3].copy_from_slice(nw.as_slice());
        }
    }
    out
}
