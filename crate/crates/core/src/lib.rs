//! Mesh-bound Gaussian splatting.
//!
//! Gaussians are attached to the triangles of a mesh and parameterised in a
//! per-triangle coordinate frame. Deforming the mesh recomputes the frames,
//! which moves, rotates and rescales every bound Gaussian without any
//! re-optimisation.
//!
//! The crate is split into:
//! - [`geometry`]: triangle meshes, triangle frames and synthetic deformers
//! - [`splat`]: Gaussian parameter types and the binding strategies
//! - [`render`]: a deterministic tile-based software rasterizer and its
//!   analytic backward pass
//! - [`fit`]: losses, metrics and the two optimisation stages
//! - [`meshx`]: ball-query occupancy, marching cubes and oriented point export
//! - [`io`]: OBJ / PLY / transforms.json / PNG / checkpoint persistence

pub mod buffer;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod meshx;
pub mod render;
pub mod splat;

pub use buffer::Image;
pub use error::{Error, Result};

/// Double precision 3-vector used for all geometry.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Double precision 3×3 matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
