use rayon::prelude::*;

use super::camera::Camera;
use super::project::NEAR_PLANE;
use crate::buffer::Image;
use crate::geometry::TriMesh;

/// Binary coverage mask of a triangle mesh, sampled at pixel centres.
///
/// Triangles with a vertex at or behind the near plane are skipped.
pub fn mesh_silhouette(mesh: &TriMesh, cam: &Camera) -> Image {
    let tris: Vec<[[f64; 2]; 3]> = mesh
        .faces
        .iter()
        .filter_map(|f| {
            let mut out = [[0.0; 2]; 3];
            for (k, &vi) in f.iter().enumerate() {
                let t = cam.to_camera(&mesh.vertices[vi as usize]);
                if !(t.z > NEAR_PLANE) {
                    return None;
                }
                let (u, v) = cam.project_camera_point(&t);
                out[k] = [u, v];
            }
            Some(out)
        })
        .collect();
    let (w, h) = (cam.width, cam.height);
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let py = y as f64 + 0.5;
            let mut row = vec![0.0; w];
            for t in &tris {
                let (ymin, ymax) = (t[0][1].min(t[1][1]).min(t[2][1]), t[0][1].max(t[1][1]).max(t[2][1]));
                if py < ymin || py > ymax {
                    continue;
                }
                let xmin = t[0][0].min(t[1][0]).min(t[2][0]);
                let xmax = t[0][0].max(t[1][0]).max(t[2][0]);
                let x0 = (xmin - 0.5).ceil().max(0.0) as usize;
                let x1 = (xmax - 0.5).floor().min(w as f64 - 1.0);
                if x1 < 0.0 {
                    continue;
                }
                for (x, cell) in row.iter_mut().enumerate().take(x1 as usize + 1).skip(x0) {
                    if *cell == 0.0 && inside(t, x as f64 + 0.5, py) {
                        *cell = 1.0;
                    }
                }
            }
            row
        })
        .collect();
    Image::from_data(w, h, 1, rows.concat()).expect("row lengths match")
}

fn inside(t: &[[f64; 2]; 3], x: f64, y: f64) -> bool {
    let edge = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    let e0 = edge(t[0], t[1]);
    let e1 = edge(t[1], t[2]);
    let e2 = edge(t[2], t[0]);
    (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use crate::{Mat3, Vec3};

    #[test]
    fn square_covers_expected_pixels() {
        // unit square at depth 1 spanning pixels 10..20 with f = 10
        let mesh = TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(1.0, 0.0, 1.0),
                Vec3::new(1.0, 1.0, 1.0),
                Vec3::new(0.0, 1.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let cam = Camera::new(32, 32, 10.0, 10.0, 10.0, 10.0, Mat3::identity(), Vec3::zeros()).unwrap();
        let s = mesh_silhouette(&mesh, &cam);
        let count: f64 = s.data.iter().sum();
        assert_eq!(count, 100.0);
        assert_eq!(s.at(10, 10, 0), 1.0);
        assert_eq!(s.at(19, 19, 0), 1.0);
        assert_eq!(s.at(20, 19, 0), 0.0);
        assert_eq!(s.at(9, 15, 0), 0.0);
    }

    #[test]
    fn sphere_area_close_to_disc() {
        let mesh = icosphere(3, 1.0);
        let cam = Camera::new(128, 128, 100.0, 100.0, 64.0, 64.0, Mat3::identity(), Vec3::new(0.0, 0.0, 5.0)).unwrap();
        let s = mesh_silhouette(&mesh, &cam);
        let count: f64 = s.data.iter().sum();
        // apparent radius of a unit sphere at distance 5
        let r = 100.0 * (1.0f64 / 5.0).asin().tan();
        let disc = std::f64::consts::PI * r * r;
        assert!((count - disc).abs() / disc < 0.03, "{count} vs {disc}");
    }
}
