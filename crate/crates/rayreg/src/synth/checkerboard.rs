//! Synthetic checkerboard recordings: exact corner projections for every
//! camera of a rig, over a set of board poses, with optional detector noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::calib::{BoardSpec, CalibrationView, CornerObservation};
use crate::geometry::{FrameId, Point3, RigidTransform};
use crate::rig::CameraRig;

use super::SynthError;

/// Project the board corners of each pose into every camera. A pose is valid
/// only if all corners land inside all images with positive depth; invalid
/// poses are rejected.
pub fn project_board_views(
    rig: &CameraRig,
    board: &BoardSpec,
    poses: &[RigidTransform],
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<CalibrationView>, SynthError> {
    let mut views = Vec::new();
    let normal = if noise_sigma > 0.0 {
        Some(Normal::new(0.0, noise_sigma).expect("valid sigma"))
    } else {
        None
    };
    let mut valid_poses = 0u32;
    for (pose_idx, pose) in poses.iter().enumerate() {
        let Some(projections) = project_pose(rig, board, pose) else {
            continue;
        };
        let view_id = format!("v{pose_idx:03}");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(pose_idx as u64 + 1);
        for (cam_idx, corners) in projections.into_iter().enumerate() {
            let corners = corners
                .into_iter()
                .map(|mut c| {
                    if let Some(n) = &normal {
                        c.image_point.u += n.sample(&mut rng);
                        c.image_point.v += n.sample(&mut rng);
                    }
                    c
                })
                .collect();
            views.push(CalibrationView {
                camera_id: rig.cameras()[cam_idx].id.clone(),
                view_id: view_id.clone(),
                corners,
            });
        }
        valid_poses += 1;
    }
    if valid_poses == 0 {
        return Err(SynthError::NoValidPose);
    }
    Ok(views)
}

/// All cameras' corner observations for one pose, or None if any corner
/// falls outside any camera.
fn project_pose(
    rig: &CameraRig,
    board: &BoardSpec,
    pose: &RigidTransform,
) -> Option<Vec<Vec<CornerObservation>>> {
    let mut per_camera = vec![Vec::with_capacity(board.corner_count()); rig.cameras().len()];
    for row in 0..board.rows {
        for col in 0..board.cols {
            let bp = board.point(row, col);
            let in_depth = pose
                .apply(&Point3::new(bp.x, bp.y, 0.0, pose.from_frame()))
                .ok()?;
            for (cam_idx, cam) in rig.cameras().iter().enumerate() {
                let px = cam.model.project_from_depth(&in_depth).ok()??;
                let w = cam.model.intrinsics.width as f64;
                let h = cam.model.intrinsics.height as f64;
                if !(px.u >= 0.0 && px.u < w && px.v >= 0.0 && px.v < h) {
                    return None;
                }
                per_camera[cam_idx].push(CornerObservation {
                    board_row: row,
                    board_col: col,
                    board_point: bp,
                    image_point: px,
                });
            }
        }
    }
    Some(per_camera)
}

/// Generate `count` board poses visible to every camera: centers spread over
/// the rig's working volume, tilts between 8 and 30 degrees about random
/// axes. Errors when the sampler cannot find enough valid poses.
pub fn generate_poses(
    rig: &CameraRig,
    board: &BoardSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<RigidTransform>, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut poses = Vec::with_capacity(count);
    let depth_frame = rig.depth_frame();
    let z_lo = rig.roi.z_min + 0.25 * (rig.roi.z_max - rig.roi.z_min);
    let z_hi = rig.roi.z_min + 0.85 * (rig.roi.z_max - rig.roi.z_min);
    let mut attempts = 0usize;
    let max_attempts = 400 * count.max(1);
    while poses.len() < count && attempts < max_attempts {
        attempts += 1;
        let center_target = nalgebra::Vector3::new(
            rng.random_range(-0.06..0.06),
            rng.random_range(-0.06..0.06),
            rng.random_range(z_lo..z_hi),
        );
        let tilt: f64 = rng.random_range(8.0f64.to_radians()..30.0f64.to_radians());
        let azimuth: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let spin: f64 = rng.random_range(-0.35..0.35);
        let axis = nalgebra::Vector3::new(azimuth.cos(), azimuth.sin(), 0.0);
        let rotation = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(axis),
            tilt,
        ) * nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::z_axis(), spin);
        let rotation = rotation.into_inner();
        let c = board.center();
        let translation = center_target - rotation * nalgebra::Vector3::new(c.x, c.y, 0.0);
        let pose = RigidTransform::new(
            rotation,
            translation,
            FrameId::board(poses.len() as u32),
            depth_frame,
        )
        .expect("valid rotation");
        if project_pose(rig, board, &pose).is_some() {
            poses.push(pose);
        }
    }
    if poses.len() < count {
        return Err(SynthError::NoValidPose);
    }
    Ok(poses)
}

/// The physical board as a scene primitive: the inner-corner grid plus a
/// one-square margin on every side, posed like the corners.
pub fn board_primitive(board: &BoardSpec, pose: &RigidTransform) -> super::scene::Primitive {
    let c = board.center();
    let center = pose.rotation() * nalgebra::Vector3::new(c.x, c.y, 0.0) + pose.translation();
    super::scene::Primitive::Rectangle {
        pose: super::scene::Pose::new(*pose.rotation(), center),
        half_u: ((board.cols + 1) as f64) * 0.5 * board.square_m,
        half_v: ((board.rows + 1) as f64) * 0.5 * board.square_m,
    }
}

/// Frontal poses (board parallel to the image plane) at a range of depths;
/// a known-degenerate configuration for intrinsics initialization.
pub fn frontal_poses(rig: &CameraRig, board: &BoardSpec, count: usize) -> Vec<RigidTransform> {
    let depth_frame = rig.depth_frame();
    let c = board.center();
    (0..count)
        .map(|i| {
            let z = 0.55 + 0.1 * i as f64;
            RigidTransform::new(
                nalgebra::Matrix3::identity(),
                nalgebra::Vector3::new(-c.x, -c.y, z),
                FrameId::board(i as u32),
                depth_frame,
            )
            .unwrap()
        })
        .collect()
}
