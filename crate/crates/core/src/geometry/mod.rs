//! Triangle meshes, per-triangle frames and synthetic deformers.

mod deform;
mod frame;
mod mesh;
mod primitives;

pub use deform::{apply_deformation, Axis, Deformation};
pub use frame::{compute_adaption, compute_frame, compute_frames, TriangleFrame};
pub use mesh::{validate_correspondence, TriMesh, AREA_EPSILON};
pub use primitives::{icosphere, perturb_vertices};
