//! Binding Gaussians to mesh triangles.
//!
//! Four modes are supported:
//!
//! | mode                       | rotation        | scale                   | mean                                   |
//! |----------------------------|-----------------|-------------------------|----------------------------------------|
//! | `shape-aware`              | `Rt · Rl`       | `β · e ⊙ exp(sl)`       | `Rt · (e ⊙ μl) + μt`                   |
//! | `shape-aware-no-adaption`  | `Rt · Rl`       | `exp(sl)`               | `Rt · μl + μt`                         |
//! | `on-mesh-flat`             | `Rt · Rn(θ)`    | `(exp(sl.x), ε, exp(sl.z))` | `Rt · (μl.x, 0, μl.z) + μt`        |
//! | `mesh-offset`              | `Rt · Rl`       | `exp(sl)`               | `Σ wᵢ vᵢ + Δμ` (Δμ in world space)     |
//!
//! `Rn(θ)` is the in-plane part of the local quaternion: a rotation about the
//! frame's second axis, which is the face normal.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gaussian::{logit, sigmoid, GlobalGaussian, GlobalGrad, LocalGaussian, ShCoeffs};
use super::quat;
use crate::error::{Error, Result};
use crate::geometry::{compute_frame, compute_frames, validate_correspondence, TriMesh, TriangleFrame};
use crate::{Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BindingMode {
    ShapeAware,
    ShapeAwareNoAdaption,
    OnMeshFlat,
    MeshOffset,
}

impl BindingMode {
    pub const ALL: [BindingMode; 4] = [
        BindingMode::ShapeAware,
        BindingMode::ShapeAwareNoAdaption,
        BindingMode::OnMeshFlat,
        BindingMode::MeshOffset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BindingMode::ShapeAware => "shape-aware",
            BindingMode::ShapeAwareNoAdaption => "shape-aware-no-adaption",
            BindingMode::OnMeshFlat => "on-mesh-flat",
            BindingMode::MeshOffset => "mesh-offset",
        }
    }
}

impl fmt::Display for BindingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BindingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BindingMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown binding mode '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BindingConfig {
    pub mode: BindingMode,
    /// Gaussians per triangle.
    pub per_tri: usize,
    pub beta: f64,
    /// One barycentric triple per slot.
    pub barycentric: Vec<[f64; 3]>,
    /// Thickness along the normal for `on-mesh-flat`.
    pub flat_eps: f64,
    pub sh_degree: u8,
}

impl Default for BindingConfig {
    fn default() -> Self {
        Self::new(BindingMode::ShapeAware, 3)
    }
}

impl BindingConfig {
    pub const DEFAULT_BETA: f64 = 10.0;
    pub const DEFAULT_FLAT_EPS: f64 = 1e-5;
    pub const INITIAL_OPACITY: f64 = 0.1;

    pub fn new(mode: BindingMode, per_tri: usize) -> Self {
        Self {
            mode,
            per_tri,
            beta: Self::DEFAULT_BETA,
            barycentric: default_barycentric_set(per_tri),
            flat_eps: Self::DEFAULT_FLAT_EPS,
            sh_degree: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_tri == 0 {
            return Err(Error::Config("at least one Gaussian per triangle is required".into()));
        }
        if self.barycentric.len() != self.per_tri {
            return Err(Error::Config(format!(
                "{} barycentric triples given for {} Gaussians per triangle",
                self.barycentric.len(),
                self.per_tri
            )));
        }
        for w in &self.barycentric {
            let sum: f64 = w.iter().sum();
            if w.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("invalid barycentric triple {w:?}")));
            }
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.flat_eps > 0.0) {
            return Err(Error::Config(format!("flat thickness must be positive, got {}", self.flat_eps)));
        }
        if self.sh_degree > super::gaussian::MAX_SH_DEGREE {
            return Err(Error::Config(format!("sh degree {} exceeds 3", self.sh_degree)));
        }
        Ok(())
    }
}

/// Barycentric triples used to seed `n` Gaussians per triangle.
///
/// `n = 3` is `(½,¼,¼), (¼,½,¼), (¼,¼,½)`; `n = 1` is the centroid and
/// `n = 4` adds the centroid to the three-point set. Larger counts take the
/// centroids of a `k × k` subdivision of the triangle, row by row.
pub fn default_barycentric_set(n: usize) -> Vec<[f64; 3]> {
    let third = 1.0 / 3.0;
    let three = [[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]];
    match n {
        0 => Vec::new(),
        1 => vec![[third; 3]],
        2 => three[..2].to_vec(),
        3 => three.to_vec(),
        4 => {
            let mut v = three.to_vec();
            v.push([third; 3]);
            v
        }
        _ => {
            let k = (n as f64).sqrt().ceil() as usize;
            let kf = k as f64;
            let mut out = Vec::with_capacity(k * k);
            for i in 0..k {
                for j in 0..(k - i) {
                    // upward sub-triangle
                    let (a, b) = (i as f64 + third, j as f64 + third);
                    out.push([a / kf, b / kf, 1.0 - (a + b) / kf]);
                    if j + 1 < k - i {
                        let (a, b) = (i as f64 + 2.0 * third, j as f64 + 2.0 * third);
                        out.push([a / kf, b / kf, 1.0 - (a + b) / kf]);
                    }
                }
            }
            out.truncate(n);
            out
        }
    }
}

fn barycentric_point(frame: &TriangleFrame, w: &[f64; 3]) -> Vec3 {
    frame.vertices[0] * w[0] + frame.vertices[1] * w[1] + frame.vertices[2] * w[2]
}

/// Seeds `cfg.per_tri` Gaussians on every non-degenerate face.
pub fn init_binding(mesh: &TriMesh, cfg: &BindingConfig) -> Result<Vec<LocalGaussian>> {
    cfg.validate()?;
    let frames = compute_frames(mesh);
    let valid = frames.iter().filter(|f| f.is_some()).count();
    if valid == 0 {
        return Err(Error::EmptyMesh);
    }
    let opacity_logit = logit(BindingConfig::INITIAL_OPACITY);
    let mut out = Vec::with_capacity(valid * cfg.per_tri);
    for (face, frame) in frames.iter().enumerate() {
        let Some(frame) = frame else { continue };
        let [l1, l2, l3] = frame.edge_lengths;
        let sigma = (l1 + l2 + l3) / 9.0;
        let rt = frame.rotation.transpose();
        for (slot, w) in cfg.barycentric.iter().enumerate() {
            let p = barycentric_point(frame, w);
            let local = rt * (p - frame.centroid);
            let (local_mean, local_log_scale) = match cfg.mode {
                BindingMode::ShapeAware => (
                    local.component_div(&frame.adaption),
                    frame.adaption.map(|e| (sigma / (cfg.beta * e)).ln()),
                ),
                BindingMode::ShapeAwareNoAdaption => (local, Vec3::repeat(sigma.ln())),
                BindingMode::OnMeshFlat => (Vec3::new(local.x, 0.0, local.z), Vec3::repeat(sigma.ln())),
                BindingMode::MeshOffset => (Vec3::zeros(), Vec3::repeat(sigma.ln())),
            };
            out.push(LocalGaussian {
                tri_index: face as u32,
                slot: slot as u16,
                local_mean,
                local_rotation: quat::IDENTITY,
                local_log_scale,
                opacity_logit,
                sh: [[0.0; 3]; 16],
            });
        }
    }
    Ok(out)
}

fn flat_quaternion(q: [f64; 4]) -> [f64; 4] {
    [q[0], 0.0, q[2], 0.0]
}

/// Maps a bound Gaussian to world space through its triangle frame.
pub fn to_global(g: &LocalGaussian, frame: &TriangleFrame, cfg: &BindingConfig) -> GlobalGaussian {
    let rt = &frame.rotation;
    let (rotation, scale, mean) = match cfg.mode {
        BindingMode::ShapeAware => {
            let e = &frame.adaption;
            (
                rt * quat::to_matrix(g.local_rotation),
                g.local_log_scale.map(f64::exp).component_mul(e) * cfg.beta,
                rt * g.local_mean.component_mul(e) + frame.centroid,
            )
        }
        BindingMode::ShapeAwareNoAdaption => (
            rt * quat::to_matrix(g.local_rotation),
            g.local_log_scale.map(f64::exp),
            rt * g.local_mean + frame.centroid,
        ),
        BindingMode::OnMeshFlat => {
            let s = g.local_log_scale;
            (
                rt * quat::to_matrix(flat_quaternion(g.local_rotation)),
                Vec3::new(s.x.exp(), cfg.flat_eps, s.z.exp()),
                rt * Vec3::new(g.local_mean.x, 0.0, g.local_mean.z) + frame.centroid,
            )
        }
        BindingMode::MeshOffset => {
            let w = &cfg.barycentric[g.slot as usize % cfg.barycentric.len()];
            (
                rt * quat::to_matrix(g.local_rotation),
                g.local_log_scale.map(f64::exp),
                barycentric_point(frame, w) + g.local_mean,
            )
        }
    };
    GlobalGaussian {
        mean,
        rotation,
        scale,
        opacity: sigmoid(g.opacity_logit),
        sh: g.sh,
        sh_degree: cfg.sh_degree,
        normal: frame.normal,
    }
}

fn frame_for(mesh: &TriMesh, g: &LocalGaussian) -> Result<TriangleFrame> {
    compute_frame(mesh, g.tri_index as usize)
}

/// World-space Gaussians for `mesh`, which must be the mesh the Gaussians are
/// bound to (or a copy with identical topology).
pub fn to_global_all(
    gaussians: &[LocalGaussian],
    mesh: &TriMesh,
    cfg: &BindingConfig,
) -> Result<Vec<GlobalGaussian>> {
    let frames = compute_frames(mesh);
    gaussians
        .par_iter()
        .map(|g| {
            let frame = match frames.get(g.tri_index as usize) {
                Some(Some(f)) => *f,
                Some(None) => return Err(frame_for(mesh, g).unwrap_err()),
                None => {
                    return Err(Error::Topology(format!(
                        "gaussian bound to face {} but the mesh has {} faces",
                        g.tri_index,
                        mesh.face_count()
                    )))
                }
            };
            Ok(to_global(g, &frame, cfg))
        })
        .collect()
}

/// Re-poses every bound Gaussian on a deformed copy of `reference`.
///
/// Local attributes are only read; frames are recomputed on `deformed`.
pub fn adapt_all(
    gaussians: &[LocalGaussian],
    reference: &TriMesh,
    deformed: &TriMesh,
    cfg: &BindingConfig,
) -> Result<Vec<GlobalGaussian>> {
    if !validate_correspondence(reference, deformed) {
        return Err(Error::Topology(format!(
            "deformed mesh ({} vertices, {} faces) does not match the bound mesh ({} vertices, {} faces)",
            deformed.vertex_count(),
            deformed.face_count(),
            reference.vertex_count(),
            reference.face_count()
        )));
    }
    to_global_all(gaussians, deformed, cfg)
}

/// Gradient with respect to the learnable attributes of a [`LocalGaussian`].
#[derive(Clone, Debug, PartialEq)]
pub struct LocalGrad {
    pub local_mean: Vec3,
    pub local_rotation: [f64; 4],
    pub local_log_scale: Vec3,
    pub opacity_logit: f64,
    pub sh: ShCoeffs,
}

/// Chains a world-space gradient back through the binding transform.
pub fn local_backward(
    g: &LocalGaussian,
    frame: &TriangleFrame,
    cfg: &BindingConfig,
    grad: &GlobalGrad,
) -> LocalGrad {
    let rt_t = frame.rotation.transpose();
    let d_local_rot: Mat3 = rt_t * grad.rotation;
    let (local_mean, local_rotation, local_log_scale) = match cfg.mode {
        BindingMode::ShapeAware => {
            let e = &frame.adaption;
            let s = g.local_log_scale.map(f64::exp).component_mul(e) * cfg.beta;
            (
                (rt_t * grad.mean).component_mul(e),
                quat::matrix_backward(g.local_rotation, &d_local_rot),
                grad.scale.component_mul(&s),
            )
        }
        BindingMode::ShapeAwareNoAdaption => (
            rt_t * grad.mean,
            quat::matrix_backward(g.local_rotation, &d_local_rot),
            grad.scale.component_mul(&g.local_log_scale.map(f64::exp)),
        ),
        BindingMode::OnMeshFlat => {
            let dm = rt_t * grad.mean;
            let dq = quat::matrix_backward(flat_quaternion(g.local_rotation), &d_local_rot);
            let s = g.local_log_scale;
            (
                Vec3::new(dm.x, 0.0, dm.z),
                [dq[0], 0.0, dq[2], 0.0],
                Vec3::new(grad.scale.x * s.x.exp(), 0.0, grad.scale.z * s.z.exp()),
            )
        }
        BindingMode::MeshOffset => (
            grad.mean,
            quat::matrix_backward(g.local_rotation, &d_local_rot),
            grad.scale.component_mul(&g.local_log_scale.map(f64::exp)),
        ),
    };
    let o = sigmoid(g.opacity_logit);
    LocalGrad {
        local_mean,
        local_rotation,
        local_log_scale,
        opacity_logit: grad.opacity * o * (1.0 - o),
        sh: grad.sh,
    }
}
