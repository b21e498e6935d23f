//! Planar-target camera calibration: closed-form initialization, joint
//! nonlinear refinement, and pairwise extrinsics.

mod homography;
mod lm;
mod refine;
mod stereo;
mod zhang;

pub use homography::{apply_homography, estimate_homography};
pub use lm::{lm_solve, LmOptions, LmOutcome, LmStatus};
pub use refine::{calibrate_camera, fit_board_pose, refine_camera};
pub use stereo::{chordal_mean_rotation, stereo_extrinsics};
pub use zhang::{board_pose_from_homography, intrinsics_from_homographies};

use std::collections::BTreeMap;

use nalgebra::Vector2;
use thiserror::Error;

use crate::geometry::{Distortion, FrameId, GeomError, Intrinsics, PixelCoord, RigidTransform};

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("insufficient views: need at least {needed}, got {got}")]
    InsufficientViews { needed: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("ill-conditioned constraint system: {0}")]
    IllConditioned(String),
    #[error("no shared views between cameras '{0}' and '{1}'")]
    NoSharedViews(String, String),
    #[error("optimization diverged for {what} (cost {cost} after {iterations} iterations)")]
    Diverged {
        what: String,
        cost: f64,
        iterations: usize,
    },
    #[error("optimization diverged for camera '{}' (cost {cost}); last iterate attached", last.camera_id)]
    DivergedCamera {
        last: Box<CameraCalibration>,
        cost: f64,
    },
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

/// Checkerboard geometry: inner-corner grid and square size in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoardSpec {
    pub rows: u32,
    pub cols: u32,
    pub square_m: f64,
}

impl BoardSpec {
    pub fn new(rows: u32, cols: u32, square_m: f64) -> Self {
        BoardSpec {
            rows,
            cols,
            square_m,
        }
    }

    /// Board-plane position of the inner corner at (row, col), in meters.
    pub fn point(&self, row: u32, col: u32) -> Vector2<f64> {
        Vector2::new(col as f64 * self.square_m, row as f64 * self.square_m)
    }

    pub fn corner_count(&self) -> usize {
        (self.rows * self.cols) as usize
    }

    /// Board center in board-plane coordinates.
    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(
            (self.cols - 1) as f64 * 0.5 * self.square_m,
            (self.rows - 1) as f64 * 0.5 * self.square_m,
        )
    }
}

/// One detected corner: its position on the board plane (z = 0 in the board
/// frame) and its raw (distorted) image position.
#[derive(Clone, Copy, Debug)]
pub struct CornerObservation {
    pub board_row: u32,
    pub board_col: u32,
    pub board_point: Vector2<f64>,
    pub image_point: PixelCoord,
}

/// All corners one camera detected in one board pose. `view_id` is shared
/// across cameras observing the same physical pose.
#[derive(Clone, Debug)]
pub struct CalibrationView {
    pub camera_id: String,
    pub view_id: String,
    pub corners: Vec<CornerObservation>,
}

/// Calibrated parameters of a single camera, with the per-view board poses
/// estimated alongside them.
#[derive(Clone, Debug)]
pub struct CameraCalibration {
    pub camera_id: String,
    pub intrinsics: Intrinsics,
    pub distortion: Distortion,
    /// Per view id: transform from the board frame to this camera's frame.
    pub board_poses: BTreeMap<String, RigidTransform>,
    /// Mean Euclidean reprojection distance over all corners of all views.
    pub mean_reprojection_error: f64,
}

/// Full multi-camera result: per-camera parameters plus pairwise transforms
/// for every ordered camera pair.
#[derive(Clone, Debug)]
pub struct CalibrationResult {
    pub cameras: BTreeMap<String, CameraCalibration>,
    /// (from, to) -> transform mapping points in `from`'s frame to `to`'s.
    pub pairs: BTreeMap<(String, String), RigidTransform>,
}

impl CalibrationResult {
    pub fn pair(&self, from: &str, to: &str) -> Option<&RigidTransform> {
        self.pairs.get(&(from.to_string(), to.to_string()))
    }
}

/// Reprojection of a board corner through intrinsics + distortion + pose.
pub(crate) fn project_board_point(
    intrinsics: &Intrinsics,
    distortion: &Distortion,
    pose: &RigidTransform,
    board_point: &Vector2<f64>,
) -> Result<PixelCoord, GeomError> {
    let p = crate::geometry::Point3::new(board_point.x, board_point.y, 0.0, pose.from_frame());
    let cam = pose.apply(&p)?;
    if cam.z() <= 0.0 {
        return Err(GeomError::PointBehindCamera { z: cam.z() });
    }
    let xn = Vector2::new(cam.x() / cam.z(), cam.y() / cam.z());
    Ok(intrinsics.apply(&distortion.distort(&xn)))
}

/// Mean Euclidean distance between reprojected and detected corners over a
/// set of views, given per-view poses keyed by view id.
pub fn mean_reprojection_error(
    intrinsics: &Intrinsics,
    distortion: &Distortion,
    views: &[CalibrationView],
    poses: &BTreeMap<String, RigidTransform>,
) -> Result<f64, CalibError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for view in views {
        let pose = poses
            .get(&view.view_id)
            .ok_or_else(|| CalibError::Degenerate(format!("no pose for view {}", view.view_id)))?;
        for corner in &view.corners {
            let proj = project_board_point(intrinsics, distortion, pose, &corner.board_point)?;
            sum += proj.distance(&corner.image_point);
            count += 1;
        }
    }
    if count == 0 {
        return Err(CalibError::InsufficientPoints { needed: 1, got: 0 });
    }
    Ok(sum / count as f64)
}

/// Calibrate every camera found in `views` and every ordered camera pair.
///
/// Per camera: homography initialization, closed-form intrinsics, zero
/// initial distortion, then joint Levenberg-Marquardt refinement. Pairwise:
/// chordal averaging over shared views followed by pose-only refinement; the
/// reverse direction of each pair is the exact inverse.
pub fn calibrate_all(
    views: &[CalibrationView],
    image_sizes: &BTreeMap<String, (u32, u32)>,
) -> Result<CalibrationResult, CalibError> {
    let mut by_camera: BTreeMap<String, Vec<CalibrationView>> = BTreeMap::new();
    let mut view_ids: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for view in views {
        view_ids.insert(view.view_id.clone());
        by_camera
            .entry(view.camera_id.clone())
            .or_default()
            .push(view.clone());
    }
    // Board frames are shared across cameras observing the same pose.
    let view_frames: BTreeMap<String, FrameId> = view_ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, FrameId::board(i as u32)))
        .collect();

    let mut cameras = BTreeMap::new();
    for (index, (camera_id, cam_views)) in by_camera.iter().enumerate() {
        let (width, height) = *image_sizes.get(camera_id).ok_or_else(|| {
            CalibError::Degenerate(format!("no image size declared for camera '{camera_id}'"))
        })?;
        let calib = refine::calibrate_camera(
            camera_id,
            cam_views,
            width,
            height,
            FrameId::camera(index as u32),
            &view_frames,
        )?;
        cameras.insert(camera_id.clone(), calib);
    }

    let ids: Vec<String> = cameras.keys().cloned().collect();
    let mut pairs = BTreeMap::new();
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            let a = &cameras[&ids[i]];
            let b = &cameras[&ids[j]];
            let views_a = &by_camera[&ids[i]];
            let views_b = &by_camera[&ids[j]];
            let m_ab = stereo_extrinsics(a, views_a, b, views_b)?;
            pairs.insert((ids[i].clone(), ids[j].clone()), m_ab);
            pairs.insert((ids[j].clone(), ids[i].clone()), m_ab.invert());
        }
    }

    Ok(CalibrationResult { cameras, pairs })
}
