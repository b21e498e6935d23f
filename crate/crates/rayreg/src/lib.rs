//! Pixel-level registration of images from heterogeneous camera rigs.
//!
//! A depth camera's depth map is turned into a triangle mesh of the observed
//! surface; per-pixel viewing rays of any target camera are cast into that
//! mesh, and the 3D hit points are reprojected into every other camera to
//! transport pixel values between views. Occlusions and regions hidden from
//! the depth camera are detected per pixel and classified, so invalid
//! mappings can be masked instead of silently corrupting the output.
//!
//! Pipeline stages:
//!
//! 1. **calib** - planar-target calibration: per-camera intrinsics and
//!    distortion plus pairwise rigid transforms, from checkerboard corners.
//! 2. **mesh** - depth map to object mesh, plus the occluded-space mesh hung
//!    from silhouette boundary edges.
//! 3. **raycast** - BVH-accelerated first-hit and any-hit triangle queries.
//! 4. **register** - per-pixel correspondence, case classification,
//!    registered images, masks and multimodal point clouds.
//! 5. **metrics** - reprojection, epipolar and ray-cast error measures.
//! 6. **synth** - seeded synthetic scenes with analytic ground truth.
//! 7. **io** - rig/corner/image/point-cloud file formats and the CLI.

pub mod cli;
pub mod calib;
pub mod geometry;
pub mod image;
pub mod mesh;
pub mod metrics;
pub mod raycast;
pub mod register;
pub mod rig;
pub mod synth;

pub use geometry::{Distortion, FrameId, GeomError, Intrinsics, PixelCoord, Point3, RigidTransform};
pub use image::ImageBuf;
pub use mesh::{DepthMap, Roi, TriangleMesh};
pub use raycast::{Bvh, Hit, Ray};
pub use register::{
    register_all, CorrespondenceMap, Interp, MultimodalPointCloud, ProjectionCase,
    RegistrationOptions, RegistrationOutput, TargetRayField,
};
pub use rig::{Camera, CameraModel, CameraRig, RigBuilder};
