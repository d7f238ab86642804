use crate::error::{Error, Result};
use crate::Vec3;

/// Faces whose area is at or below this are treated as degenerate.
pub const AREA_EPSILON: f64 = 1e-12;

/// Indexed triangle mesh.
///
/// Face winding fixes orientation: the face normal is
/// `(v2 - v1) × (v3 - v1)` normalised.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl TriMesh {
    /// Builds a mesh, checking that every face index is in range.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let k = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i as usize >= k) {
                return Err(Error::Topology(format!(
                    "face {fi} references vertex {bad} but the mesh has {k} vertices"
                )));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
        }
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    #[inline]
    pub fn face_vertices(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [v1, v2, v3] = self.face_vertices(face);
        0.5 * (v2 - v1).cross(&(v3 - v1)).norm()
    }

    pub fn is_degenerate(&self, face: usize) -> bool {
        !(self.face_area(face) > AREA_EPSILON)
    }

    /// Indices of all faces with area above [`AREA_EPSILON`].
    pub fn valid_faces(&self) -> Vec<usize> {
        (0..self.face_count())
            .filter(|&f| !self.is_degenerate(f))
            .collect()
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    /// Signed enclosed volume; positive for closed outward-oriented meshes.
    pub fn signed_volume(&self) -> f64 {
        (0..self.face_count())
            .map(|f| {
                let [a, b, c] = self.face_vertices(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Undirected edges with the number of faces using each one.
    pub fn edge_face_counts(&self) -> std::collections::BTreeMap<(u32, u32), usize> {
        let mut counts = std::collections::BTreeMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// `V - E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertex_count()];
        for f in &self.faces {
            for &i in f {
                used[i as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        let e = self.edge_face_counts().len() as i64;
        v - e + self.face_count() as i64
    }
}

/// True iff both meshes have the same vertex count and identical face lists.
pub fn validate_correspondence(a: &TriMesh, b: &TriMesh) -> bool {
    a.vertex_count() == b.vertex_count() && a.faces == b.faces
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> TriMesh {
        TriMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()],
            vec![[0, 1, 2], [0, 1, 3]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = TriMesh::new(vec![Vec3::zeros()], vec![[0, 0, 1]]).unwrap_err();
        assert!(matches!(err, Error::Topology(_)));
    }

    #[test]
    fn correspondence() {
        let m = tri();
        assert!(validate_correspondence(&m, &m));
        let mut swapped = m.clone();
        swapped.faces.swap(0, 1);
        assert!(!validate_correspondence(&m, &swapped));
        let mut moved = m.clone();
        moved.vertices[3] += Vec3::new(0.5, 0.0, 0.0);
        assert!(validate_correspondence(&m, &moved));
        let mut fewer = m.clone();
        fewer.vertices.push(Vec3::zeros());
        assert!(!validate_correspondence(&m, &fewer));
    }

    #[test]
    fn degenerate_flag() {
        let m = TriMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(m.is_degenerate(0));
        assert!(m.valid_faces().is_empty());
    }
}
