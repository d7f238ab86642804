use std::sync::OnceLock;

use rayon::prelude::*;

use super::occupancy::OccupancyGrid;
use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::Vec3;

/// Where surface vertices go on a crossing cell edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VertexPlacement {
    /// Edge midpoint.
    #[default]
    Midpoint,
    /// Linear interpolation of the iso level between the two node values.
    Interpolate,
}

/// Corner `c` of a unit cell sits at `(c & 1, c >> 1 & 1, c >> 2 & 1)`.
fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The 12 cell edges as `(lower corner, axis)`.
fn edges() -> [(usize, usize); 12] {
    let mut out = [(0, 0); 12];
    let mut n = 0;
    for axis in 0..3 {
        for c in 0..8 {
            if c & (1 << axis) == 0 {
                out[n] = (c, axis);
                n += 1;
            }
        }
    }
    out
}

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi ^ lo).trailing_zeros() as usize;
    edges().iter().position(|&e| e == (lo, axis)).expect("corners share an edge")
}

/// Corners of each cell face, counter-clockwise seen from outside the cell.
fn faces() -> [[usize; 4]; 6] {
    let mut out = [[0; 4]; 6];
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let base = side << axis;
            // (u, v, axis) is right-handed, so this order is CCW about +axis
            let mut ring = [base, base | 1 << u, base | 1 << u | 1 << v, base | 1 << v];
            if side == 0 {
                ring.reverse();
            }
            out[2 * axis + side] = ring;
        }
    }
    out
}

/// Surface loops, as cycles of cell edges, for each of the 256 inside/outside patterns.
///
/// On every face each run of consecutive inside corners contributes one
/// segment between the edges where the run starts and ends. Corners that only
/// touch diagonally therefore stay apart, and the rule depends on the face
/// alone, so neighbouring cells always agree. Loops run counter-clockwise
/// seen from outside the occupied region.
fn table() -> &'static [Vec<Vec<u8>>; 256] {
    static TABLE: OnceLock<[Vec<Vec<u8>>; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let faces = faces();
        let mut out: [Vec<Vec<u8>>; 256] = std::array::from_fn(|_| Vec::new());
        for (config, loops) in out.iter_mut().enumerate() {
            let inside = |c: usize| config >> c & 1 == 1;
            let mut next = [usize::MAX; 12];
            for ring in &faces {
                for k in 0..4 {
                    let (prev, cur) = (ring[(k + 3) % 4], ring[k]);
                    if inside(prev) || !inside(cur) {
                        continue;
                    }
                    // a run starts at `cur`; find its end
                    let mut end = k;
                    while inside(ring[(end + 1) % 4]) {
                        end = (end + 1) % 4;
                    }
                    let enter = edge_between(prev, cur);
                    let leave = edge_between(ring[end], ring[(end + 1) % 4]);
                    next[enter] = leave;
                }
            }
            let mut used = [false; 12];
            for start in 0..12 {
                if next[start] == usize::MAX || used[start] {
                    continue;
                }
                let mut ring = vec![start as u8];
                used[start] = true;
                let mut e = next[start];
                while e != start {
                    used[e] = true;
                    ring.push(e as u8);
                    e = next[e];
                }
                loops.push(ring);
            }
        }
        out
    })
}

/// A vertex of the output: a crossing on a lattice edge or the centre of a loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum VertexId {
    /// `3 * node index + axis`.
    Edge(u64),
    /// `(cell index, loop number)`.
    Centre(u64, u8),
}

/// Extracts the `iso` level set of a binary occupancy grid as triangles
/// oriented away from occupied nodes, with midpoint vertex placement.
pub fn marching_cube(grid: &OccupancyGrid, iso: f64) -> Result<TriMesh> {
    marching_cube_with(grid, iso, VertexPlacement::Midpoint)
}

pub fn marching_cube_with(grid: &OccupancyGrid, iso: f64, placement: VertexPlacement) -> Result<TriMesh> {
    if !(iso > 0.0 && iso < 1.0) {
        return Err(Error::Config(format!("iso level must lie in (0, 1), got {iso}")));
    }
    let [nx, ny, nz] = grid.resolution;
    if nx < 2 || ny < 2 || nz < 2 {
        return Ok(TriMesh::empty());
    }
    let table = table();
    let cell_edges = edges();
    let value = |i: usize, j: usize, k: usize| grid.get(i, j, k) as f64;
    let cell_index = |i: usize, j: usize, k: usize| ((k * (ny - 1) + j) * (nx - 1) + i) as u64;
    // triangles plus the lattice edges around each loop centre, in cell-major order
    type Slab = (Vec<[VertexId; 3]>, Vec<(VertexId, Vec<u64>)>);
    let slabs: Vec<Slab> = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut tris = Vec::new();
            let mut centres = Vec::new();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut config = 0;
                    for c in 0..8 {
                        let [dx, dy, dz] = corner_offset(c);
                        if value(i + dx, j + dy, k + dz) > iso {
                            config |= 1 << c;
                        }
                    }
                    for (n, ring) in table[config].iter().enumerate() {
                        let ids: Vec<u64> = ring
                            .iter()
                            .map(|&e| {
                                let (c, axis) = cell_edges[e as usize];
                                let [dx, dy, dz] = corner_offset(c);
                                3 * grid.index(i + dx, j + dy, k + dz) as u64 + axis as u64
                            })
                            .collect();
                        if ids.len() == 3 {
                            tris.push([VertexId::Edge(ids[0]), VertexId::Edge(ids[1]), VertexId::Edge(ids[2])]);
                            continue;
                        }
                        // a centre vertex keeps chords off the cell faces, which
                        // neighbouring cells could otherwise duplicate
                        let centre = VertexId::Centre(cell_index(i, j, k), n as u8);
                        for m in 0..ids.len() {
                            tris.push([centre, VertexId::Edge(ids[m]), VertexId::Edge(ids[(m + 1) % ids.len()])]);
                        }
                        centres.push((centre, ids));
                    }
                }
            }
            (tris, centres)
        })
        .collect();
    let mut tris = Vec::new();
    let mut centres = Vec::new();
    for (t, c) in slabs {
        tris.extend(t);
        centres.extend(c);
    }
    let mut ids: Vec<VertexId> = tris.iter().flatten().copied().collect();
    ids.sort_unstable();
    ids.dedup();
    let edge_point = |id: u64| {
        let axis = (id % 3) as usize;
        let node = (id / 3) as usize;
        let i = node % nx;
        let j = (node / nx) % ny;
        let k = node / (nx * ny);
        let p = grid.node(i, j, k);
        let mut step = [0; 3];
        step[axis] = 1;
        let q = grid.node(i + step[0], j + step[1], k + step[2]);
        match placement {
            VertexPlacement::Midpoint => (p + q) * 0.5,
            VertexPlacement::Interpolate => {
                let (vp, vq) = (value(i, j, k), value(i + step[0], j + step[1], k + step[2]));
                p + (q - p) * ((iso - vp) / (vq - vp))
            }
        }
    };
    let mut vertices: Vec<Vec3> = ids
        .par_iter()
        .map(|id| match id {
            VertexId::Edge(e) => edge_point(*e),
            VertexId::Centre(..) => Vec3::zeros(),
        })
        .collect();
    for (centre, ring) in &centres {
        let at = ids.binary_search(centre).expect("centre present");
        let sum: Vec3 = ring.iter().map(|&e| edge_point(e)).sum();
        vertices[at] = sum / ring.len() as f64;
    }
    let faces = tris
        .iter()
        .map(|t| t.map(|id| ids.binary_search(&id).expect("vertex present") as u32))
        .collect();
    TriMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshx::occupancy::{build_occupancy, build_occupancy_on};

    fn grid_from(res: usize, f: impl Fn(usize, usize, usize) -> bool) -> OccupancyGrid {
        let mut values = Vec::new();
        for k in 0..res {
            for j in 0..res {
                for i in 0..res {
                    values.push(f(i, j, k) as u8);
                }
            }
        }
        OccupancyGrid {
            resolution: [res; 3],
            origin: Vec3::zeros(),
            spacing: Vec3::repeat(1.0),
            values,
        }
    }

    fn assert_closed(mesh: &TriMesh) {
        for (edge, count) in mesh.edge_face_counts() {
            assert_eq!(count, 2, "edge {edge:?}");
        }
        assert!(mesh.signed_volume() > 0.0);
    }

    #[test]
    fn faces_are_ccw_from_outside() {
        for (f, ring) in faces().iter().enumerate() {
            let axis = f / 2;
            let sign = if f % 2 == 1 { 1.0 } else { -1.0 };
            let p = |c: usize| {
                let o = corner_offset(c);
                Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64)
            };
            let n = (p(ring[1]) - p(ring[0])).cross(&(p(ring[2]) - p(ring[1])));
            assert!(n[axis] * sign > 0.0);
        }
    }

    #[test]
    fn table_is_complementary() {
        let t = table();
        assert!(t[0].is_empty() && t[255].is_empty());
        assert_eq!(t[1], vec![vec![0, 4, 8]]);
        for c in 0..256 {
            // complementary patterns cross the same edges
            let mut a: Vec<u8> = t[c].iter().flatten().copied().collect();
            let mut b: Vec<u8> = t[255 - c].iter().flatten().copied().collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn every_single_pattern_closes() {
        // each pattern embedded alone in a 4³ grid yields a closed surface
        for config in 1..256usize {
            let g = grid_from(4, |i, j, k| {
                (1..=2).contains(&i)
                    && (1..=2).contains(&j)
                    && (1..=2).contains(&k)
                    && config >> ((i - 1) | (j - 1) << 1 | (k - 1) << 2) & 1 == 1
            });
            let mesh = marching_cube(&g, 0.5).unwrap();
            assert_closed(&mesh);
        }
    }

    #[test]
    fn block_is_a_sphere_topologically() {
        let g = grid_from(8, |i, j, k| (3..5).contains(&i) && (3..5).contains(&j) && (3..5).contains(&k));
        let mesh = marching_cube(&g, 1e-4).unwrap();
        assert_closed(&mesh);
        assert_eq!(mesh.euler_characteristic(), 2);
    }

    #[test]
    fn diagonal_blocks_stay_separate() {
        let g = grid_from(6, |i, j, k| (i, j, k) == (2, 2, 2) || (i, j, k) == (3, 3, 2));
        let mesh = marching_cube(&g, 0.5).unwrap();
        assert_closed(&mesh);
        // two spheres
        assert_eq!(mesh.euler_characteristic(), 4);
    }

    #[test]
    fn random_grids_are_closed() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let vals: Vec<bool> = (0..1000).map(|_| rng.random_bool(0.45)).collect();
            let g = grid_from(10, |i, j, k| {
                i > 0 && j > 0 && k > 0 && i < 9 && j < 9 && k < 9 && vals[(k * 10 + j) * 10 + i]
            });
            let mesh = marching_cube(&g, 0.5).unwrap();
            assert_closed(&mesh);
        }
    }

    #[test]
    fn empty_and_full_grids() {
        assert!(marching_cube(&grid_from(5, |_, _, _| false), 0.5).unwrap().is_empty());
        assert!(marching_cube(&grid_from(5, |_, _, _| true), 0.5).unwrap().is_empty());
        assert!(marching_cube(&grid_from(5, |_, _, _| true), 1.0).is_err());
    }

    #[test]
    fn interpolated_vertices_hug_empty_nodes() {
        let g = grid_from(8, |i, j, k| (3..5).contains(&i) && (3..5).contains(&j) && (3..5).contains(&k));
        let mesh = marching_cube_with(&g, 1e-4, VertexPlacement::Interpolate).unwrap();
        assert_closed(&mesh);
        for v in mesh.vertices.iter().filter(|v| v.iter().filter(|c| c.fract() == 0.0).count() == 2) {
            // crossings sit 1e-4 from an empty node at 2 or 5
            let near = v.iter().any(|&c| (c - 2.0 - 1e-4).abs() < 1e-9 || (c - 5.0 + 1e-4).abs() < 1e-9);
            assert!(near, "{v:?}");
        }
    }

    #[test]
    fn sphere_samples_stay_near_the_sphere() {
        let n = 10_000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<Vec3> = (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let t = golden * i as f64;
                Vec3::new(r * t.cos(), y, r * t.sin())
            })
            .collect();
        let tau = 0.05;
        let grid = build_occupancy(&pts, 64, tau).unwrap();
        let mesh = marching_cube(&grid, 1e-4).unwrap();
        assert!(!mesh.is_empty());
        let delta = tau + grid.spacing.norm();
        for v in &mesh.vertices {
            assert!((v.norm() - 1.0).abs() <= delta);
        }
    }

    #[test]
    fn translation_equivariance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec3> = (0..300)
            .map(|_| Vec3::new(rng.random_range(0.5..1.5), rng.random_range(0.5..1.5), rng.random_range(0.5..1.5)))
            .collect();
        // dyadic values keep every node position exact
        let t = Vec3::new(2.0, -1.0, 0.5);
        let (origin, spacing, tau) = (Vec3::zeros(), Vec3::repeat(0.0625), 0.1);
        let a = build_occupancy_on(&pts, origin, spacing, [32; 3], tau).unwrap();
        let moved: Vec<Vec3> = pts.iter().map(|p| p + t).collect();
        let b = build_occupancy_on(&moved, origin + t, spacing, [32; 3], tau).unwrap();
        let ma = marching_cube(&a, 1e-4).unwrap();
        let mb = marching_cube(&b, 1e-4).unwrap();
        assert_eq!(ma.faces, mb.faces);
        for (p, q) in ma.vertices.iter().zip(&mb.vertices) {
            assert!((p + t - q).norm() < 1e-12);
        }
    }
}
