use std::path::Path;

use super::ply::{read_ply, write_ply, Element, Ply, PlyFormat, Property, ScalarType, Value};
use crate::error::{Error, Result};
use crate::meshx::OrientedPointSet;
use crate::Vec3;

const FIELDS: [&str; 6] = ["x", "y", "z", "nx", "ny", "nz"];

/// Writes oriented points as binary little-endian PLY with float x,y,z,nx,ny,nz.
pub fn write_oriented_points(set: &OrientedPointSet, path: &Path) -> Result<()> {
    let mut el = Element::new("vertex", FIELDS.iter().map(|n| Property::scalar(n, ScalarType::F32)).collect());
    el.rows = set
        .positions
        .iter()
        .zip(&set.normals)
        .map(|(p, n)| p.iter().chain(n.iter()).map(|&v| Value::Scalar(v as f32 as f64)).collect())
        .collect();
    write_ply(
        &Ply {
            format: PlyFormat::BinaryLittleEndian,
            comments: Vec::new(),
            elements: vec![el],
        },
        path,
    )
}

pub fn read_oriented_points(path: &Path) -> Result<OrientedPointSet> {
    let ply = read_ply(path)?;
    let schema = |m: String| Error::Schema(format!("{}: {m}", path.display()));
    let el = ply.element("vertex").ok_or_else(|| schema("no vertex element".into()))?;
    let idx: Vec<usize> = FIELDS
        .iter()
        .map(|n| el.property_index(n).ok_or_else(|| schema(format!("missing property '{n}'"))))
        .collect::<Result<_>>()?;
    let mut out = OrientedPointSet::default();
    for row in &el.rows {
        let v: Vec<f64> = idx
            .iter()
            .map(|&i| match &row[i] {
                Value::Scalar(x) => Ok(*x),
                Value::List(_) => Err(schema("list-valued coordinate".into())),
            })
            .collect::<Result<_>>()?;
        out.positions.push(Vec3::new(v[0], v[1], v[2]));
        out.normals.push(Vec3::new(v[3], v[4], v[5]));
    }
    Ok(out)
}
