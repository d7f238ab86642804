//! Synthetic mesh deformers.
//!
//! These stand in for edits made in external modelling tools. Every
//! deformer only moves vertices; the face list is never touched.

use serde::{Deserialize, Serialize};

use super::mesh::TriMesh;
use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The axis a bend curves towards.
    fn next(self) -> usize {
        (self.index() + 1) % 3
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Deformation {
    /// `v -> rotation * v + translation`.
    Rigid { rotation: Mat3, translation: Vec3 },
    /// `v -> k * v` about the origin.
    UniformScale(f64),
    /// Bends the mesh's extent along `axis` into an arc of `angle` radians,
    /// curving towards the next axis (x→y, y→z, z→x).
    Bend { axis: Axis, angle: f64 },
    /// Scales the coordinates perpendicular to `axis` linearly from 1 at the
    /// low end of the bounding box to `factor` at the high end.
    Taper { axis: Axis, factor: f64 },
    /// Scales the coordinate along `axis` by `factor` about the box centre.
    Stretch { axis: Axis, factor: f64 },
    /// Replaces every vertex position.
    ReplaceVertices(Vec<Vec3>),
}

pub fn apply_deformation(mesh: &TriMesh, d: &Deformation) -> Result<TriMesh> {
    let vertices = match d {
        Deformation::Rigid {
            rotation,
            translation,
        } => mesh
            .vertices
            .iter()
            .map(|v| rotation * v + translation)
            .collect(),
        Deformation::UniformScale(k) => {
            if !(*k > 0.0) {
                return Err(Error::Config(format!("scale factor must be positive, got {k}")));
            }
            mesh.vertices.iter().map(|v| v * *k).collect()
        }
        Deformation::Bend { axis, angle } => bend(mesh, *axis, *angle),
        Deformation::Taper { axis, factor } => taper(mesh, *axis, *factor),
        Deformation::Stretch { axis, factor } => {
            let (lo, hi) = bounds_or_zero(mesh);
            let a = axis.index();
            let mid = 0.5 * (lo[a] + hi[a]);
            mesh.vertices
                .iter()
                .map(|v| {
                    let mut w = *v;
                    w[a] = mid + (v[a] - mid) * factor;
                    w
                })
                .collect()
        }
        Deformation::ReplaceVertices(vs) => {
            if vs.len() != mesh.vertex_count() {
                return Err(Error::Topology(format!(
                    "replacement has {} vertices, mesh has {}",
                    vs.len(),
                    mesh.vertex_count()
                )));
            }
            vs.clone()
        }
    };
    Ok(TriMesh {
        vertices,
        faces: mesh.faces.clone(),
    })
}

fn bounds_or_zero(mesh: &TriMesh) -> (Vec3, Vec3) {
    mesh.bounds().unwrap_or((Vec3::zeros(), Vec3::zeros()))
}

fn bend(mesh: &TriMesh, axis: Axis, angle: f64) -> Vec<Vec3> {
    let (lo, hi) = bounds_or_zero(mesh);
    let a = axis.index();
    let b = axis.next();
    let length = hi[a] - lo[a];
    if angle == 0.0 || length <= 0.0 {
        return mesh.vertices.clone();
    }
    let curvature = angle / length;
    let radius = 1.0 / curvature;
    mesh.vertices
        .iter()
        .map(|v| {
            let phi = curvature * (v[a] - lo[a]);
            let r = radius - v[b];
            let mut w = *v;
            w[a] = lo[a] + r * phi.sin();
            w[b] = radius - r * phi.cos();
            w
        })
        .collect()
}

fn taper(mesh: &TriMesh, axis: Axis, factor: f64) -> Vec<Vec3> {
    let (lo, hi) = bounds_or_zero(mesh);
    let a = axis.index();
    let centre = 0.5 * (lo + hi);
    let length = hi[a] - lo[a];
    mesh.vertices
        .iter()
        .map(|v| {
            let t = if length > 0.0 { (v[a] - lo[a]) / length } else { 0.0 };
            let s = 1.0 + (factor - 1.0) * t;
            let mut w = centre + (v - centre) * s;
            w[a] = v[a];
            w
        })
        .collect()
}
