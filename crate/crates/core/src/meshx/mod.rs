//! Surface extraction from Gaussian centres.

mod mc;
mod occupancy;
mod points;

pub use mc::{marching_cube, marching_cube_with, VertexPlacement};
pub use occupancy::{build_occupancy, build_occupancy_on, fitted_lattice, OccupancyGrid, MIN_RESOLUTION};
pub use points::{export_oriented_points, OrientedPointSet};

/// Default ball radius, in scene units.
pub const DEFAULT_TAU: f64 = 0.01;
/// Default iso level.
pub const DEFAULT_ISO: f64 = 1e-4;
/// Default samples per axis.
pub const DEFAULT_RESOLUTION: usize = 64;
