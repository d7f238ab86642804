//! Gaussian checkpoints stored as binary PLY with custom properties.

use std::collections::HashMap;
use std::path::Path;

use super::ply::{parse_ply, write_ply, Element, Ply, PlyFormat, Property, ScalarType, Value};
use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::splat::{sh_coeff_count, BindingConfig, BindingMode, FreeGaussian, LocalGaussian, ShCoeffs, MAX_SH_DEGREE};
use crate::Vec3;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "meshsplat checkpoint";

/// Mesh-bound Gaussians with the binding they were created under.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: BindingConfig,
    pub gaussians: Vec<LocalGaussian>,
}

impl Checkpoint {
    /// Checks that every binding refers to a face of `mesh`.
    pub fn validate_against(&self, mesh: &TriMesh) -> Result<()> {
        match self.gaussians.iter().find(|g| g.tri_index as usize >= mesh.face_count()) {
            Some(g) => Err(Error::Topology(format!(
                "checkpoint binds to face {} but the mesh has {} faces",
                g.tri_index,
                mesh.face_count()
            ))),
            None => Ok(()),
        }
    }
}

/// Unbound Gaussians from the first stage.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeCheckpoint {
    pub sh_degree: u8,
    pub gaussians: Vec<FreeGaussian>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointKind {
    Bound,
    Free,
}

fn f32s(names: &[&str]) -> Vec<Property> {
    names.iter().map(|n| Property::scalar(n, ScalarType::F32)).collect()
}

fn sh_properties(degree: u8) -> Vec<Property> {
    (0..3 * sh_coeff_count(degree)).map(|i| Property::scalar(&format!("sh_{i}"), ScalarType::F32)).collect()
}

fn push_sh(row: &mut Vec<Value>, sh: &ShCoeffs, degree: u8) {
    for c in sh.iter().take(sh_coeff_count(degree)) {
        row.extend(c.iter().map(|&v| Value::Scalar(v as f32 as f64)));
    }
}

fn push3(row: &mut Vec<Value>, v: &Vec3) {
    row.extend(v.iter().map(|&x| Value::Scalar(x as f32 as f64)));
}

fn push4(row: &mut Vec<Value>, q: &[f64; 4]) {
    row.extend(q.iter().map(|&x| Value::Scalar(x as f32 as f64)));
}

fn common_comments(kind: &str, sh_degree: u8) -> Vec<String> {
    vec![
        MAGIC.to_string(),
        format!("format_version {CHECKPOINT_VERSION}"),
        format!("kind {kind}"),
        format!("sh_degree {sh_degree}"),
    ]
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let cfg = &ckpt.config;
    cfg.validate()?;
    let mut comments = common_comments("bound", cfg.sh_degree);
    comments.push(format!("mode {}", cfg.mode));
    comments.push(format!("beta {}", cfg.beta));
    comments.push(format!("per_tri {}", cfg.per_tri));
    comments.push(format!("flat_eps {}", cfg.flat_eps));
    for w in &cfg.barycentric {
        comments.push(format!("barycentric {} {} {}", w[0], w[1], w[2]));
    }
    let mut props = vec![Property::scalar("tri_idx", ScalarType::I32)];
    props.extend(f32s(&["lx", "ly", "lz", "qw", "qx", "qy", "qz", "lsx", "lsy", "lsz", "op"]));
    props.extend(sh_properties(cfg.sh_degree));
    let mut el = Element::new("vertex", props);
    // slots are implied by record order within a face
    let mut order: Vec<&LocalGaussian> = ckpt.gaussians.iter().collect();
    order.sort_by_key(|g| (g.tri_index, g.slot));
    for g in order {
        let mut row = vec![Value::Scalar(g.tri_index as f64)];
        push3(&mut row, &g.local_mean);
        push4(&mut row, &g.local_rotation);
        push3(&mut row, &g.local_log_scale);
        row.push(Value::Scalar(g.opacity_logit as f32 as f64));
        push_sh(&mut row, &g.sh, cfg.sh_degree);
        el.rows.push(row);
    }
    Ok(super::ply::encode_ply(&Ply {
        format: PlyFormat::BinaryLittleEndian,
        comments,
        elements: vec![el],
    }))
}

pub fn write_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(ckpt)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_free_checkpoint(ckpt: &FreeCheckpoint, path: &Path) -> Result<()> {
    if ckpt.sh_degree > MAX_SH_DEGREE {
        return Err(Error::Config(format!("sh degree {} exceeds {MAX_SH_DEGREE}", ckpt.sh_degree)));
    }
    let has_normals = !ckpt.gaussians.is_empty() && ckpt.gaussians.iter().all(|g| g.normal.is_some());
    let mut comments = common_comments("free", ckpt.sh_degree);
    comments.push(format!("has_normals {}", has_normals as u8));
    let mut props = f32s(&["x", "y", "z"]);
    if has_normals {
        props.extend(f32s(&["nx", "ny", "nz"]));
    }
    props.extend(f32s(&["qw", "qx", "qy", "qz", "lsx", "lsy", "lsz", "op"]));
    props.extend(sh_properties(ckpt.sh_degree));
    let mut el = Element::new("vertex", props);
    for g in &ckpt.gaussians {
        let mut row = Vec::new();
        push3(&mut row, &g.mean);
        if has_normals {
            push3(&mut row, &g.normal.expect("checked"));
        }
        push4(&mut row, &g.rotation);
        push3(&mut row, &g.log_scale);
        row.push(Value::Scalar(g.opacity_logit as f32 as f64));
        push_sh(&mut row, &g.sh, ckpt.sh_degree);
        el.rows.push(row);
    }
    write_ply(
        &Ply {
            format: PlyFormat::BinaryLittleEndian,
            comments,
            elements: vec![el],
        },
        path,
    )
}

struct Header {
    kind: CheckpointKind,
    sh_degree: u8,
    fields: HashMap<String, String>,
    barycentric: Vec<[f64; 3]>,
}

fn parse_header(ply: &Ply, path: &Path) -> Result<Header> {
    let schema = |msg: String| Error::Schema(format!("{}: {msg}", path.display()));
    if !ply.comments.iter().any(|c| c == MAGIC) {
        return Err(schema("not a checkpoint (missing header comment)".into()));
    }
    let mut fields = HashMap::new();
    let mut barycentric = Vec::new();
    for c in &ply.comments {
        let Some((k, v)) = c.split_once(' ') else { continue };
        if k == "barycentric" {
            let w: Vec<f64> = v.split_whitespace().filter_map(|x| x.parse().ok()).collect();
            if w.len() != 3 {
                return Err(schema(format!("bad barycentric comment '{v}'")));
            }
            barycentric.push([w[0], w[1], w[2]]);
        } else {
            fields.insert(k.to_string(), v.trim().to_string());
        }
    }
    let get = |k: &str| fields.get(k).ok_or_else(|| schema(format!("missing '{k}' header comment")));
    let version: u32 = get("format_version")?.parse().map_err(|_| schema("bad format_version".into()))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let kind = match get("kind")?.as_str() {
        "bound" => CheckpointKind::Bound,
        "free" => CheckpointKind::Free,
        other => return Err(schema(format!("unknown checkpoint kind '{other}'"))),
    };
    let sh_degree: u8 = get("sh_degree")?.parse().map_err(|_| schema("bad sh_degree".into()))?;
    if sh_degree > MAX_SH_DEGREE {
        return Err(schema(format!("sh degree {sh_degree} exceeds {MAX_SH_DEGREE}")));
    }
    Ok(Header {
        kind,
        sh_degree,
        fields,
        barycentric,
    })
}

/// Named column lookup over the checkpoint element.
struct Columns<'a> {
    el: &'a Element,
    path: &'a Path,
}

impl Columns<'_> {
    fn index(&self, name: &str) -> Result<usize> {
        self.el
            .property_index(name)
            .ok_or_else(|| Error::Schema(format!("{}: missing property '{name}'", self.path.display())))
    }

    fn indices(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.index(n)).collect()
    }

    fn sh(&self, degree: u8) -> Result<Vec<usize>> {
        let n = 3 * sh_coeff_count(degree);
        let extra = self.el.properties.iter().filter(|p| p.name.starts_with("sh_")).count();
        if extra != n {
            return Err(Error::Schema(format!(
                "{}: {extra} sh properties for degree {degree} (expected {n})",
                self.path.display()
            )));
        }
        (0..n).map(|i| self.index(&format!("sh_{i}"))).collect()
    }
}

fn scalar(v: &Value) -> f64 {
    match v {
        Value::Scalar(x) => *x,
        Value::List(_) => f64::NAN,
    }
}

fn read_sh(row: &[Value], cols: &[usize]) -> ShCoeffs {
    let mut sh = [[0.0; 3]; 16];
    for (i, &c) in cols.iter().enumerate() {
        sh[i / 3][i % 3] = scalar(&row[c]);
    }
    sh
}

fn load(path: &Path) -> Result<(Ply, Header)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ply = parse_ply(&bytes, path)?;
    let header = parse_header(&ply, path)?;
    if ply.element("vertex").is_none() {
        return Err(Error::Schema(format!("{}: no vertex element", path.display())));
    }
    Ok((ply, header))
}

/// Which kind of checkpoint a file holds.
pub fn checkpoint_kind(path: &Path) -> Result<CheckpointKind> {
    Ok(load(path)?.1.kind)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let (ply, h) = load(path)?;
    let schema = |msg: String| Error::Schema(format!("{}: {msg}", path.display()));
    if h.kind != CheckpointKind::Bound {
        return Err(schema("expected a mesh-bound checkpoint, found free Gaussians".into()));
    }
    let field = |k: &str| h.fields.get(k).ok_or_else(|| schema(format!("missing '{k}' header comment")));
    let mode: BindingMode = field("mode")?.parse()?;
    let parse_f = |k: &str| -> Result<f64> { field(k)?.parse().map_err(|_| schema(format!("bad '{k}' value"))) };
    let per_tri: usize = field("per_tri")?.parse().map_err(|_| schema("bad 'per_tri' value".into()))?;
    let config = BindingConfig {
        mode,
        per_tri,
        beta: parse_f("beta")?,
        barycentric: h.barycentric.clone(),
        flat_eps: parse_f("flat_eps")?,
        sh_degree: h.sh_degree,
    };
    config.validate()?;
    let el = ply.element("vertex").expect("checked in load");
    if el.rows.is_empty() {
        return Err(schema("checkpoint holds no Gaussians".into()));
    }
    let cols = Columns { el, path };
    let tri = cols.index("tri_idx")?;
    let c = cols.indices(&["lx", "ly", "lz", "qw", "qx", "qy", "qz", "lsx", "lsy", "lsz", "op"])?;
    let sh = cols.sh(h.sh_degree)?;
    let mut next_slot: HashMap<u32, u16> = HashMap::new();
    let mut gaussians = Vec::with_capacity(el.rows.len());
    for (r, row) in el.rows.iter().enumerate() {
        let t = scalar(&row[tri]);
        if !(t >= 0.0 && t.fract() == 0.0) {
            return Err(schema(format!("record {r}: bad tri_idx {t}")));
        }
        let t = t as u32;
        let slot = next_slot.entry(t).or_insert(0);
        if *slot as usize >= per_tri {
            return Err(schema(format!("face {t} has more than {per_tri} Gaussians")));
        }
        let v = |i: usize| scalar(&row[c[i]]);
        gaussians.push(LocalGaussian {
            tri_index: t,
            slot: *slot,
            local_mean: Vec3::new(v(0), v(1), v(2)),
            local_rotation: [v(3), v(4), v(5), v(6)],
            local_log_scale: Vec3::new(v(7), v(8), v(9)),
            opacity_logit: v(10),
            sh: read_sh(row, &sh),
        });
        *slot += 1;
    }
    Ok(Checkpoint { config, gaussians })
}

pub fn read_free_checkpoint(path: &Path) -> Result<FreeCheckpoint> {
    let (ply, h) = load(path)?;
    if h.kind != CheckpointKind::Free {
        return Err(Error::Schema(format!(
            "{}: expected free Gaussians, found a mesh-bound checkpoint",
            path.display()
        )));
    }
    let el = ply.element("vertex").expect("checked in load");
    let cols = Columns { el, path };
    let c = cols.indices(&["x", "y", "z", "qw", "qx", "qy", "qz", "lsx", "lsy", "lsz", "op"])?;
    let normals = match h.fields.get("has_normals").map(String::as_str) {
        Some("1") => Some(cols.indices(&["nx", "ny", "nz"])?),
        _ => None,
    };
    let sh = cols.sh(h.sh_degree)?;
    let gaussians = el
        .rows
        .iter()
        .map(|row| {
            let v = |i: usize| scalar(&row[c[i]]);
            FreeGaussian {
                mean: Vec3::new(v(0), v(1), v(2)),
                rotation: [v(3), v(4), v(5), v(6)],
                log_scale: Vec3::new(v(7), v(8), v(9)),
                opacity_logit: v(10),
                sh: read_sh(row, &sh),
                normal: normals
                    .as_ref()
                    .map(|n| Vec3::new(scalar(&row[n[0]]), scalar(&row[n[1]]), scalar(&row[n[2]]))),
            }
        })
        .collect();
    Ok(FreeCheckpoint {
        sh_degree: h.sh_degree,
        gaussians,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use crate::splat::init_binding;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_checkpoint(degree: u8, mode: BindingMode) -> Checkpoint {
        let mesh = icosphere(1, 1.0);
        let mut config = BindingConfig::new(mode, 3);
        config.sh_degree = degree;
        config.beta = 7.5;
        let mut gaussians = init_binding(&mesh, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in &mut gaussians {
            let mut f = || rng.random_range(-2.0f32..2.0) as f64;
            g.local_mean = Vec3::new(f(), f(), f());
            g.local_rotation = [f(), f(), f(), f()];
            g.local_log_scale = Vec3::new(f(), f(), f());
            g.opacity_logit = f();
            for c in g.sh.iter_mut().take(sh_coeff_count(degree)) {
                *c = [f(), f(), f()];
            }
        }
        Checkpoint { config, gaussians }
    }

    #[test]
    fn bound_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        for (d, mode) in [(0, BindingMode::OnMeshFlat), (3, BindingMode::ShapeAware), (1, BindingMode::MeshOffset)] {
            let ckpt = random_checkpoint(d, mode);
            let p = dir.path().join("c.ply");
            write_checkpoint(&ckpt, &p).unwrap();
            assert_eq!(checkpoint_kind(&p).unwrap(), CheckpointKind::Bound);
            let back = read_checkpoint(&p).unwrap();
            assert_eq!(back, ckpt);
        }
    }

    #[test]
    fn degree_zero_has_three_sh_fields() {
        let bytes = encode_checkpoint(&random_checkpoint(0, BindingMode::ShapeAware)).unwrap();
        let ply = parse_ply(&bytes, Path::new("m")).unwrap();
        let el = ply.element("vertex").unwrap();
        assert_eq!(el.properties.iter().filter(|p| p.name.starts_with("sh_")).count(), 3);
        assert!(ply.comments.iter().any(|c| c == "flat_eps 0.00001"));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bytes = encode_checkpoint(&random_checkpoint(1, BindingMode::ShapeAware)).unwrap();
        let p = dir.path().join("t.ply");
        std::fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(read_checkpoint(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let bytes = encode_checkpoint(&random_checkpoint(0, BindingMode::ShapeAware)).unwrap();
        let p = dir.path().join("v.ply");
        // patch the header in place so the binary body is untouched
        let mut fixed = bytes.clone();
        let at = bytes.windows(16).position(|w| w == b"format_version 1").unwrap();
        fixed[at + 15] = b'9';
        std::fs::write(&p, &fixed).unwrap();
        assert!(matches!(read_checkpoint(&p), Err(Error::Version { found: 9, expected: 1 })));
    }

    #[test]
    fn free_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut gs: Vec<FreeGaussian> =
            (0..5).map(|i| FreeGaussian::new(Vec3::new(i as f64, 0.5, -0.25), 0.125, 0.5)).collect();
        for g in &mut gs {
            g.normal = Some(Vec3::new(0.0, 0.0, 1.0));
            g.sh[1] = [0.25, -0.5, 1.0];
            g.opacity_logit = 0.0;
            g.log_scale = Vec3::repeat(-2.0);
        }
        let ckpt = FreeCheckpoint { sh_degree: 1, gaussians: gs };
        let p = dir.path().join("f.ply");
        write_free_checkpoint(&ckpt, &p).unwrap();
        assert_eq!(read_free_checkpoint(&p).unwrap(), ckpt);
        assert!(read_checkpoint(&p).is_err());
    }

    #[test]
    fn validates_against_mesh() {
        let ckpt = random_checkpoint(0, BindingMode::ShapeAware);
        assert!(ckpt.validate_against(&icosphere(1, 1.0)).is_ok());
        assert!(ckpt.validate_against(&icosphere(0, 1.0)).is_err());
    }
}
