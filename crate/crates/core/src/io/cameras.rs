use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::Camera;
use crate::{Mat3, Vec3};

#[derive(Debug, Deserialize, Serialize)]
struct TransformsFile {
    camera_angle_x: Option<f64>,
    fl_x: Option<f64>,
    fl_y: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
    w: Option<usize>,
    h: Option<usize>,
    frames: Vec<FrameEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
struct FrameEntry {
    #[serde(default)]
    file_path: Option<String>,
    transform_matrix: [[f64; 4]; 4],
}

/// A camera with the image path it was listed with, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraEntry {
    pub camera: Camera,
    /// Resolved relative to the cameras file; a missing extension is kept as written.
    pub image: Option<PathBuf>,
}

fn resolve_image(base: &Path, file_path: &str) -> PathBuf {
    let p = base.join(file_path);
    if p.extension().is_none() {
        let png = p.with_extension("png");
        if png.exists() {
            return png;
        }
    }
    p
}

fn image_size(path: &Path) -> Option<(usize, usize)> {
    image::image_dimensions(path).ok().map(|(w, h)| (w as usize, h as usize))
}

/// Reads a `transforms.json` camera set.
///
/// Image size comes from `w`/`h` when present, otherwise from the first
/// frame's image file.
pub fn read_camera_set(path: &Path) -> Result<Vec<CameraEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: TransformsFile =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    if file.frames.is_empty() {
        return Err(Error::Schema(format!("{}: frames list is empty", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let images: Vec<Option<PathBuf>> =
        file.frames.iter().map(|f| f.file_path.as_deref().map(|p| resolve_image(base, p))).collect();
    let (w, h) = match (file.w, file.h) {
        (Some(w), Some(h)) => (w, h),
        _ => images
            .iter()
            .flatten()
            .find_map(|p| image_size(p))
            .ok_or_else(|| Error::Schema(format!("{}: no w/h fields and no readable frame image", path.display())))?,
    };
    let fx = match (file.fl_x, file.camera_angle_x) {
        (Some(f), _) => f,
        (None, Some(a)) => focal_from_angle(w, a),
        (None, None) => return Err(Error::Schema(format!("{}: missing camera_angle_x", path.display()))),
    };
    let fy = file.fl_y.unwrap_or(fx);
    let (cx, cy) = (file.cx.unwrap_or(0.5 * w as f64), file.cy.unwrap_or(0.5 * h as f64));
    file.frames
        .iter()
        .zip(images)
        .map(|(f, image)| {
            let (rotation, translation) = world_to_camera(&f.transform_matrix);
            Ok(CameraEntry {
                camera: Camera::new(w, h, fx, fy, cx, cy, rotation, translation)?,
                image,
            })
        })
        .collect()
}

/// Cameras of a `transforms.json` file, in frame order.
pub fn read_cameras(path: &Path) -> Result<Vec<Camera>> {
    Ok(read_camera_set(path)?.into_iter().map(|e| e.camera).collect())
}

/// Focal length in pixels for a horizontal field of view.
pub fn focal_from_angle(width: usize, angle_x: f64) -> f64 {
    0.5 * width as f64 / (0.5 * angle_x).tan()
}

/// Converts an OpenGL-style camera-to-world matrix (y up, looking down −z)
/// into a world-to-camera transform with y down and +z forward.
fn world_to_camera(m: &[[f64; 4]; 4]) -> (Mat3, Vec3) {
    let r_gl = Mat3::from_fn(|i, j| m[i][j]);
    let centre = Vec3::new(m[0][3], m[1][3], m[2][3]);
    let c2w = r_gl * Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0));
    let rotation = c2w.transpose();
    (rotation, -(rotation * centre))
}

fn camera_to_world_gl(cam: &Camera) -> [[f64; 4]; 4] {
    let c2w = cam.rotation.transpose() * Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0));
    let centre = cam.position();
    let mut m = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = c2w[(i, j)];
        }
        m[i][3] = centre[i];
    }
    m[3][3] = 1.0;
    m
}

/// Writes cameras as `transforms.json`. All cameras must share intrinsics.
pub fn write_cameras(cameras: &[Camera], image_paths: &[Option<String>], path: &Path) -> Result<()> {
    let Some(first) = cameras.first() else {
        return Err(Error::Config("no cameras to write".into()));
    };
    let file = TransformsFile {
        camera_angle_x: Some(2.0 * (0.5 * first.width as f64 / first.fx).atan()),
        fl_x: Some(first.fx),
        fl_y: Some(first.fy),
        cx: Some(first.cx),
        cy: Some(first.cy),
        w: Some(first.width),
        h: Some(first.height),
        frames: cameras
            .iter()
            .enumerate()
            .map(|(i, c)| FrameEntry {
                file_path: image_paths.get(i).cloned().flatten(),
                transform_matrix: camera_to_world_gl(c),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Schema(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("transforms.json");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn nerf_synthetic_focal() {
        assert!((focal_from_angle(800, 0.691_111_2) - 1111.11).abs() < 0.01);
    }

    #[test]
    fn identity_transform_looks_down_minus_z() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"camera_angle_x": 0.8, "w": 40, "h": 30, "frames": [
                {"file_path": "./r_0", "transform_matrix": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}]}"#,
        );
        let cams = read_cameras(&p).unwrap();
        let cam = &cams[0];
        assert_eq!(cam.position(), Vec3::zeros());
        // a point in front of an OpenGL camera is at negative z
        let t = cam.to_camera(&Vec3::new(0.3, 0.2, -2.0));
        assert!(t.z > 0.0);
        let (u, v) = cam.project_camera_point(&t);
        // y up in the world is up in the image, so v shrinks
        assert!(u > cam.cx && v < cam.cy);
        let back = cam.rotation.transpose() * (cam.unproject(u, v, t.z) - cam.translation);
        assert!((back - Vec3::new(0.3, 0.2, -2.0)).norm() < 1e-12);
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cams: Vec<Camera> = (0..4)
            .map(|i| {
                let a = i as f64;
                Camera::look_at(
                    Vec3::new(3.0 * a.cos(), 1.0, 3.0 * a.sin()),
                    Vec3::zeros(),
                    Vec3::y(),
                    32,
                    24,
                    0.7,
                )
            })
            .collect();
        let p = dir.path().join("cams.json");
        write_cameras(&cams, &[], &p).unwrap();
        let back = read_cameras(&p).unwrap();
        for (a, b) in cams.iter().zip(&back) {
            assert_eq!((a.width, a.height), (b.width, b.height));
            assert!((a.fx - b.fx).abs() < 1e-9);
            assert!((a.rotation - b.rotation).norm() < 1e-12);
            assert!((a.translation - b.translation).norm() < 1e-12);
        }
    }

    #[test]
    fn schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), r#"{"camera_angle_x": 0.8, "w": 4, "h": 4, "frames": []}"#);
        assert!(matches!(read_cameras(&p), Err(Error::Schema(_))));
        let p = write(dir.path(), r#"{"w": 4, "h": 4, "frames": [{"transform_matrix": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}]}"#);
        assert!(matches!(read_cameras(&p), Err(Error::Schema(_))));
        let p = write(dir.path(), r#"{"camera_angle_x": 0.8}"#);
        assert!(matches!(read_cameras(&p), Err(Error::Schema(_))));
        assert!(read_cameras(&dir.path().join("missing.json")).is_err());
    }
}
