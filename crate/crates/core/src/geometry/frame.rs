use rayon::prelude::*;

use super::mesh::{TriMesh, AREA_EPSILON};
use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

/// Orthonormal frame attached to one triangle.
///
/// Columns of `rotation` are the first-edge direction, the face normal and
/// their cross product, in that order. Edges are labelled cyclically:
/// `l1 = |v2 - v1|`, `l2 = |v3 - v2|`, `l3 = |v1 - v3|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleFrame {
    pub rotation: Mat3,
    pub centroid: Vec3,
    pub normal: Vec3,
    pub edge_lengths: [f64; 3],
    /// Per-axis scale factors `(e1, e2, e3)` following the triangle shape.
    pub adaption: Vec3,
    pub vertices: [Vec3; 3],
}

impl TriangleFrame {
    /// Frame with identity rotation at the origin and unit adaption.
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            centroid: Vec3::zeros(),
            normal: Vec3::y(),
            edge_lengths: [1.0; 3],
            adaption: Vec3::repeat(1.0),
            vertices: [Vec3::zeros(); 3],
        }
    }
}

/// Adaption vector from the three edge lengths.
///
/// `e1` is the first edge length, `e3` the mean of the other two and `e2`
/// the mean of `e1` and `e3`.
pub fn compute_adaption(l1: f64, l2: f64, l3: f64) -> Result<Vec3> {
    if !(l1 > 0.0 && l2 > 0.0 && l3 > 0.0) {
        return Err(Error::InvalidTriangle(format!(
            "edge lengths must be positive, got ({l1}, {l2}, {l3})"
        )));
    }
    let e1 = l1;
    let e3 = 0.5 * (l2 + l3);
    let e2 = 0.5 * (e1 + e3);
    Ok(Vec3::new(e1, e2, e3))
}

pub fn compute_frame(mesh: &TriMesh, face: usize) -> Result<TriangleFrame> {
    if face >= mesh.face_count() {
        return Err(Error::Topology(format!(
            "face index {face} out of range for {} faces",
            mesh.face_count()
        )));
    }
    let [v1, v2, v3] = mesh.face_vertices(face);
    let edge1 = v2 - v1;
    let cross = edge1.cross(&(v3 - v1));
    let area = 0.5 * cross.norm();
    if !(area > AREA_EPSILON) {
        return Err(Error::DegenerateFace { face, area });
    }
    let l1 = edge1.norm();
    let l2 = (v3 - v2).norm();
    let l3 = (v1 - v3).norm();
    let r1 = edge1 / l1;
    let normal = cross / cross.norm();
    let r3 = r1.cross(&normal);
    Ok(TriangleFrame {
        rotation: Mat3::from_columns(&[r1, normal, r3]),
        centroid: (v1 + v2 + v3) / 3.0,
        normal,
        edge_lengths: [l1, l2, l3],
        adaption: compute_adaption(l1, l2, l3)?,
        vertices: [v1, v2, v3],
    })
}

/// Frames for every face; degenerate faces map to `None`.
pub fn compute_frames(mesh: &TriMesh) -> Vec<Option<TriangleFrame>> {
    (0..mesh.face_count())
        .into_par_iter()
        .map(|f| compute_frame(mesh, f).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn single(v1: Vec3, v2: Vec3, v3: Vec3) -> TriMesh {
        TriMesh::new(vec![v1, v2, v3], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn right_triangle() {
        let m = single(Vec3::zeros(), Vec3::x(), Vec3::y());
        let f = compute_frame(&m, 0).unwrap();
        let tol = 1e-12;
        assert!((f.rotation.column(0) - Vec3::x()).norm() < tol);
        assert!((f.normal - Vec3::z()).norm() < tol);
        assert!((f.rotation.column(1) - Vec3::z()).norm() < tol);
        assert!((f.rotation.column(2) - Vec3::new(0.0, -1.0, 0.0)).norm() < tol);
        assert!((f.centroid - Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0)).norm() < tol);
        assert!((f.rotation.determinant() - 1.0).abs() < tol);
    }

    #[test]
    fn translation_only_moves_centroid() {
        let t = Vec3::repeat(5.0);
        let a = compute_frame(&single(Vec3::zeros(), Vec3::x(), Vec3::y()), 0).unwrap();
        let b = compute_frame(&single(t, Vec3::x() + t, Vec3::y() + t), 0).unwrap();
        assert_eq!(a.rotation, b.rotation);
        assert_eq!(a.adaption, b.adaption);
        assert!((b.centroid - a.centroid - t).norm() < 1e-12);
    }

    #[test]
    fn colinear_is_degenerate() {
        let m = single(Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0);
        assert!(matches!(
            compute_frame(&m, 0),
            Err(Error::DegenerateFace { face: 0, .. })
        ));
    }

    #[test]
    fn adaption_values() {
        assert_eq!(compute_adaption(2.0, 1.0, 1.0).unwrap(), Vec3::new(2.0, 1.5, 1.0));
        assert_eq!(compute_adaption(1.0, 1.0, 1.0).unwrap(), Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(compute_adaption(3.0, 4.0, 5.0).unwrap(), Vec3::new(3.0, 3.75, 4.5));
        assert!(compute_adaption(0.0, 1.0, 1.0).is_err());
        assert!(compute_adaption(1.0, -1.0, 1.0).is_err());
        assert!(compute_adaption(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn winding_flip_negates_normal() {
        let (a, b, c) = (Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0, 0.4, -0.2), Vec3::new(0.3, 1.1, 0.5));
        let f = compute_frame(&single(a, b, c), 0).unwrap();
        let g = compute_frame(&single(a, c, b), 0).unwrap();
        assert!((f.normal + g.normal).norm() < 1e-12);
    }

    fn arb_vec() -> impl Strategy<Value = Vec3> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn frame_invariants(a in arb_vec(), b in arb_vec(), c in arb_vec()) {
            let m = single(a, b, c);
            prop_assume!(m.face_area(0) > 1e-3);
            let f = compute_frame(&m, 0).unwrap();
            let rtr = f.rotation.transpose() * f.rotation;
            prop_assert!((rtr - Mat3::identity()).norm() < 1e-12);
            prop_assert!((f.rotation.determinant() - 1.0).abs() < 1e-12);
            prop_assert_eq!(f.rotation.column(1).into_owned(), f.normal);
            let e = f.adaption;
            prop_assert!(e.x > 0.0 && e.y > 0.0 && e.z > 0.0);
            prop_assert_eq!(e.y, 0.5 * (e.x + e.z));
        }

        #[test]
        fn rigid_equivariance(a in arb_vec(), b in arb_vec(), c in arb_vec(),
                              axis in arb_vec(), angle in -3.0..3.0f64, t in arb_vec()) {
            let m = single(a, b, c);
            prop_assume!(m.face_area(0) > 1e-3 && axis.norm() > 1e-3);
            let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
            let r = *rot.matrix();
            let moved = single(r * a + t, r * b + t, r * c + t);
            let f = compute_frame(&m, 0).unwrap();
            let g = compute_frame(&moved, 0).unwrap();
            prop_assert!((g.rotation - r * f.rotation).norm() < 1e-12);
            prop_assert!((g.centroid - (r * f.centroid + t)).norm() < 1e-12);
            prop_assert!((g.adaption - f.adaption).norm() < 1e-12);
        }

        #[test]
        fn uniform_scale_covariance(a in arb_vec(), b in arb_vec(), c in arb_vec(), k in 0.1..5.0f64) {
            let m = single(a, b, c);
            prop_assume!(m.face_area(0) > 1e-3);
            let f = compute_frame(&m, 0).unwrap();
            let g = compute_frame(&single(a * k, b * k, c * k), 0).unwrap();
            prop_assert!((g.adaption - f.adaption * k).norm() < 1e-11);
            prop_assert!((g.centroid - f.centroid * k).norm() < 1e-11);
            prop_assert!((g.rotation - f.rotation).norm() < 1e-11);
        }

        #[test]
        fn adaption_symmetric_in_l2_l3(l1 in 0.01..10.0f64, l2 in 0.01..10.0f64, l3 in 0.01..10.0f64) {
            prop_assert_eq!(compute_adaption(l1, l2, l3).unwrap(), compute_adaption(l1, l3, l2).unwrap());
            let e = compute_adaption(l1, l2, l3).unwrap();
            let e2 = compute_adaption(l1 + 1.0, l2, l3).unwrap();
            prop_assert!(e2.x != e.x);
        }
    }
}
