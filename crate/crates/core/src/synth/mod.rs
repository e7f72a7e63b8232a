//! Deterministic LiDAR simulator for walking capsule bodies.
//!
//! Identities are seven-parameter body/gait profiles; poses follow simple
//! sinusoidal kinematics; frames are produced by casting one ray per cell of
//! the sensor's angular grid against the body capsules. Everything is a pure
//! function of the seed.

mod dataset;
mod lidar;
mod pose;
mod profile;
mod sequence;

pub use dataset::{
    generate_dataset, load_manifest, DatasetConfig, Manifest, ManifestRow, MANIFEST_FILE,
};
pub use lidar::{scan_frame, scan_scene, Capsule, LidarModel, RigidTransform, SceneObject};
pub use pose::{pose_at, BodyPart, BodyPose};
pub use profile::{sample_identity, unit_f64, IdentityProfile};
pub use sequence::{generate_sequence, walk_frames, SENSOR_HEIGHT, WALK_DURATION};
