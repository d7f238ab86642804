//! Persistence: meshes, cameras, checkpoints, images and frame sequences.

mod bundle;
mod cameras;
mod checkpoint;
mod frames;
mod image_io;
mod mesh;
pub mod ply;
mod points;

pub use bundle::{BindingOverrides, SceneBundle};
pub use cameras::{focal_from_angle, read_camera_set, read_cameras, write_cameras, CameraEntry};
pub use checkpoint::{
    checkpoint_kind, encode_checkpoint, read_checkpoint, read_free_checkpoint, write_checkpoint,
    write_free_checkpoint, Checkpoint, CheckpointKind, FreeCheckpoint, CHECKPOINT_VERSION,
};
pub use frames::{list_frames, read_frame_sequence};
pub use image_io::{read_image, read_rgb_and_mask, resize_image, to_byte, write_image, write_u16_image};
pub use mesh::{encode_obj, parse_obj, read_mesh, write_mesh};
pub use points::{read_oriented_points, write_oriented_points};
