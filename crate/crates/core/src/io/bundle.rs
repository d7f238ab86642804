use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splat::BindingMode;

/// A scene on disk, described by a small TOML file. Relative paths are
/// resolved against the bundle's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneBundle {
    pub mesh: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub cameras: PathBuf,
    #[serde(default)]
    pub binding: BindingOverrides,
}

/// Optional binding settings used when a bundle has no checkpoint yet.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingOverrides {
    pub mode: Option<BindingMode>,
    pub per_tri: Option<usize>,
    pub beta: Option<f64>,
    pub flat_eps: Option<f64>,
    pub sh_degree: Option<u8>,
}

impl SceneBundle {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut b: SceneBundle =
            toml::from_str(&text).map_err(|e| Error::Schema(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        b.mesh.as_mut().map(fix);
        b.checkpoint.as_mut().map(fix);
        fix(&mut b.cameras);
        b.check()?;
        Ok(b)
    }

    /// Every referenced path must exist; a checkpoint may be absent only if it is not named.
    pub fn check(&self) -> Result<()> {
        for p in [Some(&self.cameras), self.mesh.as_ref(), self.checkpoint.as_ref()].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Schema(format!("bundle references missing file {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Schema(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("cams.json"), "{}").unwrap();
        std::fs::write(dir.path().join("mesh.obj"), "").unwrap();
        let p = dir.path().join("scene.toml");
        std::fs::write(&p, "mesh = \"mesh.obj\"\ncameras = \"cams.json\"\n[binding]\nmode = \"on-mesh-flat\"\nper_tri = 4\n")
            .unwrap();
        let b = SceneBundle::read(&p).unwrap();
        assert_eq!(b.mesh.as_deref(), Some(dir.path().join("mesh.obj").as_path()));
        assert_eq!(b.binding.mode, Some(BindingMode::OnMeshFlat));
        assert_eq!(b.binding.per_tri, Some(4));
    }

    #[test]
    fn missing_files_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scene.toml");
        std::fs::write(&p, "cameras = \"nope.json\"\n").unwrap();
        assert!(matches!(SceneBundle::read(&p), Err(Error::Schema(_))));
        std::fs::write(&p, "mesh = 3\n").unwrap();
        assert!(matches!(SceneBundle::read(&p), Err(Error::Schema(_))));
    }
}
