use std::fmt::Write as _;
use std::path::Path;

use super::ply::{read_ply, write_ply, Element, Ply, PlyFormat, Property, ScalarType, Value};
use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::Vec3;

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Reads an OBJ or PLY triangle mesh, chosen by file extension.
pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    match extension(path).as_str() {
        "obj" => read_obj(path),
        "ply" => read_ply_mesh(path),
        other => Err(Error::Config(format!("unsupported mesh format '.{other}' for {}", path.display()))),
    }
}

/// Writes OBJ or PLY by file extension.
pub fn write_mesh(mesh: &TriMesh, path: &Path) -> Result<()> {
    match extension(path).as_str() {
        "obj" => write_obj(mesh, path),
        "ply" => write_ply_mesh(mesh, path),
        other => Err(Error::Config(format!("unsupported mesh format '.{other}' for {}", path.display()))),
    }
}

fn fan(poly: &[u32], faces: &mut Vec<[u32; 3]>) {
    for i in 1..poly.len() - 1 {
        faces.push([poly[0], poly[i], poly[i + 1]]);
    }
}

pub fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut words = line.split_whitespace();
        match words.next() {
            Some("v") => {
                let coords: Vec<f64> = words
                    .take(3)
                    .map(|w| w.parse::<f64>().map_err(|_| err(line_no, format!("bad coordinate '{w}'"))))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(err(line_no, "vertex needs three coordinates".into()));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for w in words {
                    let first = w.split('/').next().unwrap_or("");
                    let idx: i64 = first.parse().map_err(|_| err(line_no, format!("bad face index '{w}'")))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(err(line_no, "face index 0 is invalid".into()));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err(line_no, format!("face index {idx} out of range")));
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(err(line_no, "face needs at least three vertices".into()));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

fn read_obj(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

pub fn encode_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

fn write_obj(mesh: &TriMesh, path: &Path) -> Result<()> {
    std::fs::write(path, encode_obj(mesh)).map_err(|e| Error::io(path, e))
}

fn read_ply_mesh(path: &Path) -> Result<TriMesh> {
    let ply = read_ply(path)?;
    let schema = |msg: &str| Error::Schema(format!("{}: {msg}", path.display()));
    let vertex = ply.element("vertex").ok_or_else(|| schema("no vertex element"))?;
    let idx: Vec<usize> = ["x", "y", "z"]
        .iter()
        .map(|n| vertex.property_index(n).ok_or_else(|| schema(&format!("vertex has no '{n}' property"))))
        .collect::<Result<_>>()?;
    let scalar = |v: &Value| match v {
        Value::Scalar(x) => Ok(*x),
        Value::List(_) => Err(schema("vertex coordinate is a list")),
    };
    let vertices = vertex
        .rows
        .iter()
        .map(|r| Ok(Vec3::new(scalar(&r[idx[0]])?, scalar(&r[idx[1]])?, scalar(&r[idx[2]])?)))
        .collect::<Result<Vec<_>>>()?;
    let mut faces = Vec::new();
    if let Some(face) = ply.element("face") {
        let fi = face
            .property_index("vertex_indices")
            .or_else(|| face.property_index("vertex_index"))
            .ok_or_else(|| schema("face has no vertex_indices"))?;
        let mut warned = false;
        for r in &face.rows {
            let Value::List(items) = &r[fi] else {
                return Err(schema("vertex_indices is not a list"));
            };
            if items.len() < 3 {
                return Err(schema("face with fewer than three vertices"));
            }
            if items.len() > 3 && !warned {
                log::warn!("{}: polygon faces fan-triangulated", path.display());
                warned = true;
            }
            let poly: Vec<u32> = items.iter().map(|&x| x as u32).collect();
            fan(&poly, &mut faces);
        }
    }
    TriMesh::new(vertices, faces)
}

fn write_ply_mesh(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut vertex = Element::new(
        "vertex",
        ["x", "y", "z"].iter().map(|n| Property::scalar(n, ScalarType::F64)).collect(),
    );
    vertex.rows = mesh
        .vertices
        .iter()
        .map(|v| v.iter().map(|&c| Value::Scalar(c)).collect())
        .collect();
    let mut face = Element::new("face", vec![Property::list("vertex_indices", ScalarType::U8, ScalarType::I32)]);
    face.rows = mesh
        .faces
        .iter()
        .map(|f| vec![Value::List(f.iter().map(|&i| i as f64).collect())])
        .collect();
    let ply = Ply {
        format: PlyFormat::BinaryLittleEndian,
        comments: Vec::new(),
        elements: vec![vertex, face],
    };
    write_ply(&ply, path)
}
