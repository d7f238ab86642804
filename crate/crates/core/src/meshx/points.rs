use crate::error::{Error, Result};
use crate::splat::FreeGaussian;
use crate::Vec3;

/// Positions with unit normals, the input of a screened Poisson solver.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrientedPointSet {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl OrientedPointSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// One oriented point per Gaussian: its mean and normal attribute.
///
/// Normals within 1e-6 of unit length are copied as is, others are
/// renormalised. Any missing or zero normal is an error.
pub fn export_oriented_points(gaussians: &[FreeGaussian]) -> Result<OrientedPointSet> {
    let mut out = OrientedPointSet {
        positions: Vec::with_capacity(gaussians.len()),
        normals: Vec::with_capacity(gaussians.len()),
    };
    for g in gaussians {
        let n = g.normal.ok_or(Error::MissingNormals)?;
        let len = n.norm();
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::MissingNormals);
        }
        out.positions.push(g.mean);
        out.normals.push(if (len - 1.0).abs() > 1e-6 { n / len } else { n });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copies_and_renormalises() {
        let mut gs: Vec<FreeGaussian> =
            (0..3).map(|i| FreeGaussian::new(Vec3::new(i as f64, 1.0, 2.0), 0.1, 0.5)).collect();
        gs[0].normal = Some(Vec3::z());
        gs[1].normal = Some(Vec3::new(0.0, 2.0, 0.0));
        gs[2].normal = Some(Vec3::new(1.0 + 1e-8, 0.0, 0.0));
        let set = export_oriented_points(&gs).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.positions[2], Vec3::new(2.0, 1.0, 2.0));
        assert_eq!(set.normals[0], Vec3::z());
        assert_eq!(set.normals[1], Vec3::y());
        assert_eq!(set.normals[2], Vec3::new(1.0 + 1e-8, 0.0, 0.0));
    }

    #[test]
    fn missing_normal_is_an_error() {
        let gs = vec![FreeGaussian::new(Vec3::zeros(), 0.1, 0.5)];
        assert!(matches!(export_oriented_points(&gs), Err(Error::MissingNormals)));
    }
}
