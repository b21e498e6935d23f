//! Multi-camera rig description: per-camera model plus the rigid transform
//! from the depth-camera frame into each camera's frame.

use thiserror::Error;

use crate::geometry::{
    Distortion, FrameId, GeomError, Intrinsics, PixelCoord, Point3, RigidTransform,
};
use crate::mesh::Roi;

#[derive(Debug, Error)]
pub enum RigError {
    #[error("unknown camera id '{0}'")]
    UnknownCamera(String),
    #[error("duplicate camera id '{0}'")]
    DuplicateCamera(String),
    #[error("camera id '{0}' must be non-empty and use only [A-Za-z0-9_-]")]
    InvalidCameraId(String),
    #[error("depth camera '{0}' is not in the rig")]
    MissingDepthCamera(String),
    #[error("camera '{id}': {source}")]
    Camera {
        id: String,
        #[source]
        source: GeomError,
    },
}

/// Full per-camera model: intrinsics, lens distortion, and the transform
/// from the depth-camera frame to this camera's frame.
#[derive(Clone, Debug)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    pub distortion: Distortion,
    /// Maps depth-camera-frame points into this camera's frame.
    pub from_depth: RigidTransform,
}

impl CameraModel {
    /// Project a depth-frame point into raw (distorted) pixel coordinates of
    /// this camera. None when the point is behind the camera.
    pub fn project_from_depth(&self, p: &Point3) -> Result<Option<PixelCoord>, GeomError> {
        let pc = self.from_depth.apply(p)?;
        if pc.z() <= 0.0 {
            return Ok(None);
        }
        let xn = nalgebra::Vector2::new(pc.x() / pc.z(), pc.y() / pc.z());
        Ok(Some(self.intrinsics.apply(&self.distortion.distort(&xn))))
    }

    /// Viewing ray of a raw pixel, as (origin, unit direction) in the
    /// depth-camera frame. Undistorts, backprojects, and rotates.
    pub fn pixel_ray_in_depth(
        &self,
        px: &PixelCoord,
    ) -> Result<(Point3, nalgebra::Vector3<f64>), GeomError> {
        let xd = self.intrinsics.invert(px);
        let xn = self.distortion.undistort(&xd)?;
        let dir_cam = nalgebra::Vector3::new(xn.x, xn.y, 1.0);
        let to_depth = self.from_depth.invert();
        let dir = to_depth.rotate(&dir_cam);
        let origin = self.from_depth.origin_in_from();
        Ok((origin, dir / dir.norm()))
    }

    /// Camera center expressed in the depth-camera frame.
    pub fn center_in_depth(&self) -> Point3 {
        self.from_depth.origin_in_from()
    }
}

/// One camera of the rig.
#[derive(Clone, Debug)]
pub struct Camera {
    pub id: String,
    pub modality: String,
    pub model: CameraModel,
}

/// Calibrated camera rig. Exactly one camera is the depth camera; its
/// `from_depth` transform is the identity and its frame is the reference
/// frame for meshes, rays and point clouds.
#[derive(Clone, Debug)]
pub struct CameraRig {
    cameras: Vec<Camera>,
    depth_index: usize,
    pub roi: Roi,
    pub ground_z: f64,
    pub max_vertical_angle_deg: f64,
}

impl CameraRig {
    pub fn new(
        cameras: Vec<Camera>,
        depth_camera_id: &str,
        roi: Roi,
        ground_z: Option<f64>,
        max_vertical_angle_deg: f64,
    ) -> Result<Self, RigError> {
        let mut seen = std::collections::HashSet::new();
        for cam in &cameras {
            if cam.id.is_empty()
                || !cam
                    .id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(RigError::InvalidCameraId(cam.id.clone()));
            }
            if !seen.insert(cam.id.clone()) {
                return Err(RigError::DuplicateCamera(cam.id.clone()));
            }
        }
        let depth_index = cameras
            .iter()
            .position(|c| c.id == depth_camera_id)
            .ok_or_else(|| RigError::MissingDepthCamera(depth_camera_id.to_string()))?;
        for cam in &cameras {
            cam.model
                .distortion
                .check_invertible()
                .map_err(|source| RigError::Camera {
                    id: cam.id.clone(),
                    source,
                })?;
        }
        Ok(CameraRig {
            cameras,
            depth_index,
            roi,
            ground_z: ground_z.unwrap_or(roi.z_max),
            max_vertical_angle_deg,
        })
    }

    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    pub fn depth_camera(&self) -> &Camera {
        &self.cameras[self.depth_index]
    }

    /// Frame of the depth camera; the reference frame of the rig.
    pub fn depth_frame(&self) -> FrameId {
        FrameId::camera(self.depth_index as u32)
    }

    pub fn frame_of(&self, id: &str) -> Result<FrameId, RigError> {
        let idx = self.index_of(id)?;
        Ok(FrameId::camera(idx as u32))
    }

    pub fn index_of(&self, id: &str) -> Result<usize, RigError> {
        self.cameras
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| RigError::UnknownCamera(id.to_string()))
    }

    pub fn camera(&self, id: &str) -> Result<&Camera, RigError> {
        Ok(&self.cameras[self.index_of(id)?])
    }
}

/// Builder that wires up frames: camera `i` gets frame `FrameId::camera(i)`,
/// and each transform is re-tagged from the depth frame to the camera frame.
pub struct RigBuilder {
    cameras: Vec<(String, String, Intrinsics, Distortion, nalgebra::Matrix3<f64>, nalgebra::Vector3<f64>)>,
    depth_camera_id: String,
    roi: Roi,
    ground_z: Option<f64>,
    max_vertical_angle_deg: f64,
}

impl RigBuilder {
    pub fn new(depth_camera_id: &str, roi: Roi) -> Self {
        RigBuilder {
            cameras: Vec::new(),
            depth_camera_id: depth_camera_id.to_string(),
            roi,
            ground_z: None,
            max_vertical_angle_deg: crate::mesh::DEFAULT_MAX_VERTICAL_ANGLE_DEG,
        }
    }

    pub fn ground_z(mut self, z: f64) -> Self {
        self.ground_z = Some(z);
        self
    }

    pub fn max_vertical_angle_deg(mut self, deg: f64) -> Self {
        self.max_vertical_angle_deg = deg;
        self
    }

    pub fn camera(
        mut self,
        id: &str,
        modality: &str,
        intrinsics: Intrinsics,
        distortion: Distortion,
        rotation: nalgebra::Matrix3<f64>,
        translation: nalgebra::Vector3<f64>,
    ) -> Self {
        self.cameras.push((
            id.to_string(),
            modality.to_string(),
            intrinsics,
            distortion,
            rotation,
            translation,
        ));
        self
    }

    pub fn build(self) -> Result<CameraRig, RigError> {
        let depth_index = self
            .cameras
            .iter()
            .position(|c| c.0 == self.depth_camera_id)
            .ok_or_else(|| RigError::MissingDepthCamera(self.depth_camera_id.clone()))?;
        let depth_frame = FrameId::camera(depth_index as u32);
        let mut cameras = Vec::with_capacity(self.cameras.len());
        for (i, (id, modality, intrinsics, distortion, rotation, translation)) in
            self.cameras.into_iter().enumerate()
        {
            let from_depth =
                RigidTransform::new(rotation, translation, depth_frame, FrameId::camera(i as u32))
                    .map_err(|source| RigError::Camera {
                        id: id.clone(),
                        source,
                    })?;
            cameras.push(Camera {
                id,
                modality,
                model: CameraModel {
                    intrinsics,
                    distortion,
                    from_depth,
                },
            });
        }
        CameraRig::new(
            cameras,
            &self.depth_camera_id,
            self.roi,
            self.ground_z,
            self.max_vertical_angle_deg,
        )
    }
}
