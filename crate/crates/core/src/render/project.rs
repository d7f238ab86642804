use nalgebra::{Matrix2, Matrix2x3};

use super::camera::Camera;
use super::sh;
use crate::splat::GlobalGaussian;
use crate::{Mat3, Vec3};

/// Added to the diagonal of every projected covariance, in pixels².
pub const COV2D_FLOOR: f64 = 0.3;
/// Splats closer than this (camera-space z) are culled.
pub const NEAR_PLANE: f64 = 0.01;
/// Splats are evaluated inside their `3σ` ellipse only.
pub const CUTOFF_SIGMA: f64 = 3.0;
/// Tangent-space clamp of the projection Jacobian, relative to the half field of view.
const FRUSTUM_SLACK: f64 = 1.3;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedGaussian {
    /// Index into the input list.
    pub index: usize,
    pub mean2d: [f64; 2],
    /// Projected covariance `(xx, xy, yy)` including the low-pass floor.
    pub cov2d: [f64; 3],
    /// Inverse of `cov2d`, same layout.
    pub conic: [f64; 3],
    pub depth: f64,
    pub color: [f64; 3],
    /// Channels where the SH response was clamped at zero.
    pub color_clamped: [bool; 3],
    pub opacity: f64,
    pub normal: Vec3,
    /// Inclusive pixel ranges `[x0, x1] × [y0, y1]` covered by the cutoff ellipse.
    pub rect: [usize; 4],
}

/// Jacobian of perspective projection at camera-space point `t`, with the
/// lateral tangent clamped the same way the backward pass assumes.
pub(crate) fn projection_jacobian(cam: &Camera, t: &Vec3) -> (Matrix2x3<f64>, [bool; 2]) {
    let lim_x = FRUSTUM_SLACK * 0.5 * cam.width as f64 / cam.fx;
    let lim_y = FRUSTUM_SLACK * 0.5 * cam.height as f64 / cam.fy;
    let (rx, ry) = (t.x / t.z, t.y / t.z);
    let (cx, cy) = (rx.clamp(-lim_x, lim_x), ry.clamp(-lim_y, lim_y));
    let clamped = [cx != rx, cy != ry];
    let tz = t.z;
    let j = Matrix2x3::new(
        cam.fx / tz,
        0.0,
        -cam.fx * cx / tz,
        0.0,
        cam.fy / tz,
        -cam.fy * cy / tz,
    );
    (j, clamped)
}

pub(crate) fn projected_covariance(cam: &Camera, t: &Vec3, cov3: &Mat3) -> Matrix2<f64> {
    let (j, _) = projection_jacobian(cam, t);
    let m = j * cam.rotation;
    m * cov3 * m.transpose() + Matrix2::identity() * COV2D_FLOOR
}

/// Projects one Gaussian, returning `None` when it is culled.
pub fn project(g: &GlobalGaussian, cam: &Camera) -> Option<ProjectedGaussian> {
    project_indexed(0, g, cam)
}

pub(crate) fn project_indexed(index: usize, g: &GlobalGaussian, cam: &Camera) -> Option<ProjectedGaussian> {
    let t = cam.to_camera(&g.mean);
    if !(t.z > NEAR_PLANE) {
        return None;
    }
    let cov = projected_covariance(cam, &t, &g.covariance());
    let (a, b, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let det = a * c - b * b;
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let (u, v) = cam.project_camera_point(&t);
    let ex = CUTOFF_SIGMA * a.sqrt();
    let ey = CUTOFF_SIGMA * c.sqrt();
    let range = |centre: f64, extent: f64, size: usize| -> Option<[usize; 2]> {
        let lo = (centre - extent - 0.5).ceil().max(0.0);
        let hi = (centre + extent - 0.5).floor().min(size as f64 - 1.0);
        (lo <= hi).then_some([lo as usize, hi as usize])
    };
    let [x0, x1] = range(u, ex, cam.width)?;
    let [y0, y1] = range(v, ey, cam.height)?;
    let dir = (g.mean - cam.position()).normalize();
    let raw = sh::eval_sh_unclamped(&g.sh, &dir, g.sh_degree);
    Some(ProjectedGaussian {
        index,
        mean2d: [u, v],
        cov2d: [a, b, c],
        conic: [c / det, -b / det, a / det],
        depth: t.z,
        color: raw.map(|x| x.max(0.0)),
        color_clamped: raw.map(|x| x < 0.0),
        opacity: g.opacity,
        normal: g.normal,
        rect: [x0, x1, y0, y1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splat::quat;

    fn iso(mean: Vec3, sigma: f64) -> GlobalGaussian {
        GlobalGaussian {
            mean,
            rotation: Mat3::identity(),
            scale: Vec3::repeat(sigma),
            opacity: 0.5,
            sh: [[0.0; 3]; 16],
            sh_degree: 0,
            normal: Vec3::z(),
        }
    }

    fn axis_camera(f: f64) -> Camera {
        Camera::new(64, 64, f, f, 32.0, 32.0, Mat3::identity(), Vec3::zeros()).unwrap()
    }

    #[test]
    fn on_axis_isotropic() {
        let (f, sigma, z) = (50.0, 0.1, 4.0);
        let p = project(&iso(Vec3::new(0.0, 0.0, z), sigma), &axis_camera(f)).unwrap();
        assert!((p.mean2d[0] - 32.0).abs() < 1e-12 && (p.mean2d[1] - 32.0).abs() < 1e-12);
        let expect = (f * sigma / z).powi(2) + COV2D_FLOOR;
        assert!((p.cov2d[0] - expect).abs() < 1e-12);
        assert!((p.cov2d[2] - expect).abs() < 1e-12);
        assert!(p.cov2d[1].abs() < 1e-12);
        assert!((p.depth - z).abs() < 1e-15);
    }

    #[test]
    fn behind_camera_is_culled() {
        let cam = axis_camera(50.0);
        assert!(project(&iso(Vec3::new(0.0, 0.0, -1.0), 0.1), &cam).is_none());
        assert!(project(&iso(Vec3::new(0.0, 0.0, 0.0), 0.1), &cam).is_none());
        assert!(project(&iso(Vec3::new(0.0, 0.0, 0.005), 0.1), &cam).is_none());
    }

    #[test]
    fn outside_frustum_is_culled() {
        let cam = axis_camera(50.0);
        assert!(project(&iso(Vec3::new(40.0, 0.0, 1.0), 0.01), &cam).is_none());
    }

    #[test]
    fn shared_translation_cancels() {
        let cam = Camera::look_at(Vec3::new(0.5, -3.0, 1.0), Vec3::zeros(), Vec3::z(), 64, 64, 0.9);
        let mut g = iso(Vec3::new(0.1, 0.2, -0.1), 0.05);
        g.rotation = quat::to_matrix([0.9, 0.2, -0.3, 0.1]);
        g.scale = Vec3::new(0.02, 0.05, 0.09);
        g.sh[1] = [0.3, 0.1, -0.2];
        g.sh_degree = 1;
        let shift = Vec3::new(0.25, -0.5, 1.0);
        let moved_cam = cam.transformed(&Mat3::identity(), &shift);
        let mut moved = g.clone();
        moved.mean += shift;
        let a = project(&g, &cam).unwrap();
        let b = project(&moved, &moved_cam).unwrap();
        for k in 0..2 {
            assert!((a.mean2d[k] - b.mean2d[k]).abs() < 1e-9);
        }
        for k in 0..3 {
            assert!((a.cov2d[k] - b.cov2d[k]).abs() < 1e-9);
            assert!((a.color[k] - b.color[k]).abs() < 1e-12);
        }
        assert_eq!(a.rect, b.rect);
    }
}
