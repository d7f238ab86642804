use super::quat;
use crate::{Mat3, Vec3};

pub const MAX_SH_DEGREE: u8 = 3;

/// Spherical harmonic coefficients, `[basis][channel]`, always sized for
/// degree 3. Only the first `(degree + 1)^2` rows are read.
pub type ShCoeffs = [[f64; 3]; 16];

#[inline]
pub fn sh_coeff_count(degree: u8) -> usize {
    let d = degree as usize + 1;
    d * d
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `R diag(s)^2 R^T`.
pub fn covariance(rotation: &Mat3, scale: &Vec3) -> Mat3 {
    let m = rotation * Mat3::from_diagonal(scale);
    m * m.transpose()
}

/// A world-space Gaussian as stored by the free (unbound) optimisation stage.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeGaussian {
    pub mean: Vec3,
    /// Raw quaternion `[w, x, y, z]`.
    pub rotation: [f64; 4],
    pub log_scale: Vec3,
    pub opacity_logit: f64,
    pub sh: ShCoeffs,
    /// Raw normal attribute; normalised when read.
    pub normal: Option<Vec3>,
}

impl FreeGaussian {
    pub fn new(mean: Vec3, scale: f64, opacity: f64) -> Self {
        Self {
            mean,
            rotation: quat::IDENTITY,
            log_scale: Vec3::repeat(scale.ln()),
            opacity_logit: logit(opacity),
            sh: [[0.0; 3]; 16],
            normal: None,
        }
    }

    pub fn unit_normal(&self) -> Option<Vec3> {
        self.normal.map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::z()
            }
        })
    }

    pub fn to_global(&self, sh_degree: u8) -> GlobalGaussian {
        GlobalGaussian {
            mean: self.mean,
            rotation: quat::to_matrix(self.rotation),
            scale: self.log_scale.map(f64::exp),
            opacity: sigmoid(self.opacity_logit),
            sh: self.sh,
            sh_degree,
            normal: self.unit_normal().unwrap_or_else(Vec3::zeros),
        }
    }
}

/// A Gaussian expressed in the frame of the triangle it is bound to.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalGaussian {
    pub tri_index: u32,
    /// Position in the binding's barycentric set.
    pub slot: u16,
    /// Local mean; for the offset binding this is the world-space offset.
    pub local_mean: Vec3,
    pub local_rotation: [f64; 4],
    pub local_log_scale: Vec3,
    pub opacity_logit: f64,
    pub sh: ShCoeffs,
}

/// The world-space Gaussian consumed by the renderer.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalGaussian {
    pub mean: Vec3,
    pub rotation: Mat3,
    pub scale: Vec3,
    /// Activated opacity in `(0, 1)`.
    pub opacity: f64,
    pub sh: ShCoeffs,
    pub sh_degree: u8,
    /// Unit normal, or zero when the Gaussian has none.
    pub normal: Vec3,
}

impl GlobalGaussian {
    pub fn covariance(&self) -> Mat3 {
        covariance(&self.rotation, &self.scale)
    }
}

/// Gradient of a scalar loss with respect to one [`GlobalGaussian`].
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalGrad {
    pub mean: Vec3,
    pub rotation: Mat3,
    pub scale: Vec3,
    pub opacity: f64,
    pub sh: ShCoeffs,
    pub normal: Vec3,
}

impl Default for GlobalGrad {
    fn default() -> Self {
        Self {
            mean: Vec3::zeros(),
            rotation: Mat3::zeros(),
            scale: Vec3::zeros(),
            opacity: 0.0,
            sh: [[0.0; 3]; 16],
            normal: Vec3::zeros(),
        }
    }
}

impl GlobalGrad {
    pub fn is_zero(&self) -> bool {
        self.mean == Vec3::zeros()
            && self.rotation == Mat3::zeros()
            && self.scale == Vec3::zeros()
            && self.opacity == 0.0
            && self.normal == Vec3::zeros()
            && self.sh.iter().flatten().all(|&v| v == 0.0)
    }
}
