use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::mesh::read_mesh;
use crate::error::{Error, Result};
use crate::geometry::{validate_correspondence, TriMesh};

fn frame_number(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".obj")?;
    (!digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())).then(|| digits.parse().ok())?
}

/// Paths of `frame_NNNN.obj` files in `dir`, ordered by number.
///
/// Numbering may start anywhere but must be contiguous.
pub fn list_frames(dir: &Path) -> Result<Vec<(u32, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(n) = entry.file_name().to_str().and_then(frame_number) {
            frames.insert(n, entry.path());
        }
    }
    let (Some(&first), Some(&last)) = (frames.keys().next(), frames.keys().next_back()) else {
        return Err(Error::Config(format!("no frame_NNNN.obj files in {}", dir.display())));
    };
    let missing: Vec<String> = (first..=last).filter(|n| !frames.contains_key(n)).map(|n| format!("{n:04}")).collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "frame sequence in {} is missing frame(s) {}",
            dir.display(),
            missing.join(", ")
        )));
    }
    Ok(frames.into_iter().collect())
}

/// Reads a numbered OBJ sequence; every frame must match the first one's topology.
pub fn read_frame_sequence(dir: &Path) -> Result<Vec<TriMesh>> {
    let mut out: Vec<TriMesh> = Vec::new();
    for (k, (n, path)) in list_frames(dir)?.into_iter().enumerate() {
        let mesh = read_mesh(&path)?;
        if let Some(first) = out.first() {
            if !validate_correspondence(first, &mesh) {
                return Err(Error::Topology(format!(
                    "frame index {k} ({}, frame {n:04}) does not match the topology of the first frame",
                    path.display()
                )));
            }
        }
        out.push(mesh);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use crate::io::write_mesh;

    #[test]
    fn reads_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let m = icosphere(0, 1.0);
        for i in [2, 0, 1] {
            let mut s = m.clone();
            s.vertices[0].x = i as f64;
            write_mesh(&s, &dir.path().join(format!("frame_{i:04}.obj"))).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let frames = read_frame_sequence(dir.path()).unwrap();
        assert_eq!(frames.len(), 3);
        for (i, f) in frames.iter().enumerate() {
            assert_eq!(f.vertices[0].x, i as f64);
        }
    }

    #[test]
    fn topology_drift_names_the_frame() {
        let dir = tempfile::tempdir().unwrap();
        let m = icosphere(0, 1.0);
        write_mesh(&m, &dir.path().join("frame_0000.obj")).unwrap();
        let mut extra = m.clone();
        extra.faces.push([0, 1, 2]);
        write_mesh(&extra, &dir.path().join("frame_0001.obj")).unwrap();
        let err = read_frame_sequence(dir.path()).unwrap_err();
        assert!(matches!(&err, Error::Topology(msg) if msg.contains("frame index 1")), "{err}");
    }

    #[test]
    fn gaps_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let m = icosphere(0, 1.0);
        for i in [0, 1, 3] {
            write_mesh(&m, &dir.path().join(format!("frame_{i:04}.obj"))).unwrap();
        }
        let err = read_frame_sequence(dir.path()).unwrap_err();
        assert!(err.to_string().contains("0002"), "{err}");
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_number("frame_0012.obj"), Some(12));
        assert_eq!(frame_number("frame_.obj"), None);
        assert_eq!(frame_number("frame_12a.obj"), None);
        assert_eq!(frame_number("mesh_0001.obj"), None);
    }
}
