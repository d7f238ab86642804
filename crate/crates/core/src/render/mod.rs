//! Deterministic tile-based software splatting.
//!
//! Gaussians are projected with the affine (EWA) approximation of the
//! perspective Jacobian, sorted by camera-space depth and composited front to
//! back per pixel. Alongside colour the rasterizer emits composited depth,
//! normal and accumulated alpha. [`backward`] evaluates exact gradients of
//! any scalar loss built from those buffers.

mod backward;
mod camera;
mod project;
mod pseudo_normal;
mod raster;
pub mod sh;
mod silhouette;

pub use backward::{backward, OutputGrads};
pub use camera::Camera;
pub use project::{project, ProjectedGaussian, COV2D_FLOOR, NEAR_PLANE};
pub use pseudo_normal::{pseudo_normal_from_depth, COVERAGE_THRESHOLD};
pub use raster::{rasterize, RenderOutput, ALPHA_MAX, ALPHA_MIN, TILE_SIZE, TRANSMITTANCE_MIN};
pub use sh::eval_sh;
pub use silhouette::mesh_silhouette;
