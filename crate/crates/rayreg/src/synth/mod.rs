//! Seeded synthetic scenes, virtual rigs and brute-force ground truth: the
//! verification backbone for the whole pipeline. All primitives are
//! intersected analytically so the oracle shares no code with the meshing
//! and ray-casting paths it validates.

pub mod checkerboard;
pub mod ground_truth;
pub mod render;
pub mod rigs;
pub mod scene;

pub use checkerboard::{board_primitive, frontal_poses, generate_poses, project_board_views};
pub use ground_truth::{ground_truth, GroundTruth, GroundTruthOptions, GtArea, GtHit, GtSource};
pub use render::{render_depth, render_modality, DepthRenderOptions};
pub use rigs::{desk_rig, desk_rig_zero_distortion, look_at};
pub use scene::{Pose, Primitive, Scene, SceneHit, Texture};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("no valid board pose (all rejected by visibility checks)")]
    NoValidPose,
    #[error(transparent)]
    Rig(#[from] crate::rig::RigError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeomError),
}
