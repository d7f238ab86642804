use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::Vec3;

/// Smallest accepted samples per axis.
pub const MIN_RESOLUTION: usize = 8;

/// Binary samples on a regular lattice of nodes, x varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: [usize; 3],
    /// Position of node `(0, 0, 0)`.
    pub origin: Vec3,
    /// Node spacing along each axis.
    pub spacing: Vec3,
    pub values: Vec<u8>,
}

impl OccupancyGrid {
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution[1] + j) * self.resolution[0] + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64).component_mul(&self.spacing)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        self.values[self.index(i, j, k)]
    }

    pub fn occupied_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    /// Upper corner of the lattice.
    pub fn max_corner(&self) -> Vec3 {
        let r = self.resolution;
        self.node(r[0] - 1, r[1] - 1, r[2] - 1)
    }
}

/// Lattice enclosing the points padded by `tau` plus one cell, with cubic
/// cells and `resolution` nodes along the longest axis.
pub fn fitted_lattice(points: &[Vec3], resolution: usize, tau: f64) -> (Vec3, Vec3, [usize; 3]) {
    let (lo, hi) = if points.is_empty() {
        (Vec3::repeat(-1.0), Vec3::repeat(1.0))
    } else {
        points.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        )
    };
    let extent = hi - lo + Vec3::repeat(2.0 * tau);
    let cell = extent.max() / (resolution - 3) as f64;
    let centre = (lo + hi) * 0.5;
    let half = Vec3::repeat(0.5 * (resolution - 1) as f64 * cell);
    (centre - half, Vec3::repeat(cell), [resolution; 3])
}

fn check(resolution: &[usize; 3], tau: f64) -> Result<()> {
    if resolution.iter().any(|&r| r < MIN_RESOLUTION) {
        return Err(Error::Config(format!(
            "grid resolution must be at least {MIN_RESOLUTION} per axis, got {resolution:?}"
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("ball radius must be positive, got {tau}")));
    }
    Ok(())
}

/// Samples the ball-query occupancy on a lattice fitted to `points`.
///
/// A node is 1 iff some point lies within Euclidean distance `tau`.
pub fn build_occupancy(points: &[Vec3], resolution: usize, tau: f64) -> Result<OccupancyGrid> {
    check(&[resolution; 3], tau)?;
    let (origin, spacing, res) = fitted_lattice(points, resolution, tau);
    build_occupancy_on(points, origin, spacing, res, tau)
}

#[inline]
pub(crate) fn within(p: &Vec3, q: &Vec3, tau: f64) -> bool {
    let d = p - q;
    d.x * d.x + d.y * d.y + d.z * d.z <= tau * tau
}

/// Ball-query occupancy on an explicit lattice.
pub fn build_occupancy_on(
    points: &[Vec3],
    origin: Vec3,
    spacing: Vec3,
    resolution: [usize; 3],
    tau: f64,
) -> Result<OccupancyGrid> {
    check(&resolution, tau)?;
    if spacing.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Config(format!("lattice spacing must be positive, got {spacing:?}")));
    }
    let key = |p: &Vec3| -> [i64; 3] {
        let r = (p - origin) / tau;
        [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
    };
    let mut hash: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        hash.entry(key(p)).or_default().push(i as u32);
    }
    let [nx, ny, nz] = resolution;
    let mut grid = OccupancyGrid {
        resolution,
        origin,
        spacing,
        values: vec![0; nx * ny * nz],
    };
    if points.is_empty() {
        return Ok(grid);
    }
    let g = &grid;
    let slabs: Vec<Vec<u8>> = (0..nz)
        .into_par_iter()
        .map(|k| {
            let mut slab = vec![0u8; nx * ny];
            for j in 0..ny {
                for i in 0..nx {
                    let s = g.node(i, j, k);
                    let c = key(&s);
                    'search: for dz in -1..=1 {
                        for dy in -1..=1 {
                            for dx in -1..=1 {
                                let Some(bucket) = hash.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                                    continue;
                                };
                                if bucket.iter().any(|&pi| within(&points[pi as usize], &s, tau)) {
                                    slab[j * nx + i] = 1;
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            slab
        })
        .collect();
    grid.values = slabs.concat();
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(points: &[Vec3], grid: &OccupancyGrid, tau: f64) -> Vec<u8> {
        let [nx, ny, nz] = grid.resolution;
        let mut out = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let s = grid.node(i, j, k);
                    out.push(points.iter().any(|p| within(p, &s, tau)) as u8);
                }
            }
        }
        out
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let pts: Vec<Vec3> = (0..500)
                .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5), rng.random_range(0.0..2.0)))
                .collect();
            let tau = rng.random_range(0.03..0.12);
            let grid = build_occupancy(&pts, 32, tau).unwrap();
            assert_eq!(grid.values, brute_force(&pts, &grid, tau));
            assert!(grid.occupied_count() > 0);
        }
    }

    #[test]
    fn single_point_neighbourhood() {
        // a point exactly on a node with radius 1.5 cells
        let spacing = Vec3::repeat(0.1);
        let p = Vec3::new(0.5, 0.5, 0.5);
        let grid = build_occupancy_on(&[p], Vec3::zeros(), spacing, [11; 3], 0.15).unwrap();
        // centre, 6 face neighbours and 12 edge neighbours (distance √2 ≈ 1.41 cells)
        assert_eq!(grid.occupied_count(), 19);
        assert_eq!(grid.get(5, 5, 5), 1);
        assert_eq!(grid.get(6, 6, 5), 1);
        assert_eq!(grid.get(6, 6, 6), 0);
    }

    #[test]
    fn empty_input_is_empty() {
        let grid = build_occupancy(&[], 16, 0.1).unwrap();
        assert_eq!(grid.occupied_count(), 0);
        assert_eq!(grid.values.len(), 16 * 16 * 16);
    }

    #[test]
    fn bounds_are_padded() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.5, 0.2)];
        let tau = 0.05;
        let grid = build_occupancy(&pts, 20, tau).unwrap();
        let (lo, hi) = (grid.origin, grid.max_corner());
        for a in 0..3 {
            for p in &pts {
                assert!(p[a] - tau - grid.spacing[a] >= lo[a] - 1e-12);
                assert!(p[a] + tau + grid.spacing[a] <= hi[a] + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_occupancy(&[], 4, 0.1).is_err());
        assert!(build_occupancy(&[], 16, 0.0).is_err());
    }
}
