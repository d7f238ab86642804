use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

/// Pinhole camera. Camera space is `+x` right, `+y` down, `+z` forward;
/// pixel `(i, j)` has its centre at `(i + 0.5, j + 0.5)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Rotation block of the world-to-camera transform.
    pub rotation: Mat3,
    /// Translation of the world-to-camera transform.
    pub translation: Vec3,
}

impl Camera {
    pub fn new(
        width: usize,
        height: usize,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Mat3,
        translation: Vec3,
    ) -> Result<Self> {
        let cam = Self {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera resolution must be at least 1x1".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config("focal lengths must be positive".into()));
        }
        let rtr = self.rotation.transpose() * self.rotation;
        if (rtr - Mat3::identity()).norm() > 1e-6 {
            return Err(Error::Config("camera rotation is not orthonormal".into()));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, with `up` giving the approximate
    /// upward direction in the image.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, width: usize, height: usize, fov_x: f64) -> Self {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(&up);
        if right.norm() < 1e-9 {
            right = forward.cross(&Vec3::x());
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let fx = 0.5 * width as f64 / (0.5 * fov_x).tan();
        Self {
            width,
            height,
            fx,
            fy: fx,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            rotation,
            translation: -(rotation * eye),
        }
    }

    #[inline]
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Camera centre in world coordinates.
    pub fn position(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    /// Pixel coordinates of a camera-space point.
    #[inline]
    pub fn project_camera_point(&self, t: &Vec3) -> (f64, f64) {
        (self.fx * t.x / t.z + self.cx, self.fy * t.y / t.z + self.cy)
    }

    /// Camera-space point at pixel coordinates `(u, v)` with depth `z`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z)
    }

    /// The same view after the world is moved by `p -> rotation * p + translation`.
    pub fn transformed(&self, rotation: &Mat3, translation: &Vec3) -> Self {
        let r = self.rotation * rotation.transpose();
        let t = self.translation - r * translation;
        Self {
            rotation: r,
            translation: t,
            ..self.clone()
        }
    }

    /// Same view at a new resolution, intrinsics rescaled.
    pub fn resized(&self, width: usize, height: usize) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            width,
            height,
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            ..self.clone()
        }
    }
}
