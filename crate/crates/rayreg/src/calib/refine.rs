//! Joint nonlinear refinement of intrinsics, distortion and board poses, and
//! single-view pose fitting.

use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix3, Rotation3, Vector2, Vector3};

use super::lm::{lm_solve, LmOptions, LmStatus};
use super::{
    board_pose_from_homography, estimate_homography, intrinsics_from_homographies,
    mean_reprojection_error, CalibError, CalibrationView, CameraCalibration,
};
use crate::geometry::{Distortion, FrameId, Intrinsics, RigidTransform};

/// Residual used to push the optimizer away from parameter regions where the
/// projection is undefined (point behind the camera, numeric blow-up).
const INVALID_RESIDUAL: f64 = 1e6;

const N_GLOBAL: usize = 9; // fx, fy, cx, cy, k1, k2, k3, p1, p2

/// Raw reprojection without validity checks; callers handle the sentinel.
pub(crate) fn project_raw(
    global: &[f64],
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
    board_point: &Vector2<f64>,
) -> (f64, f64) {
    let p = rotation * Vector3::new(board_point.x, board_point.y, 0.0) + translation;
    if p.z <= 1e-9 {
        return (INVALID_RESIDUAL, INVALID_RESIDUAL);
    }
    let x = p.x / p.z;
    let y = p.y / p.z;
    let r2 = x * x + y * y;
    let r4 = r2 * r2;
    let radial = 1.0 + global[4] * r2 + global[5] * r4 + global[6] * r4 * r2;
    let xd = x * radial + 2.0 * global[7] * x * y + global[8] * (r2 + 2.0 * x * x);
    let yd = y * radial + global[7] * (r2 + 2.0 * y * y) + 2.0 * global[8] * x * y;
    let u = global[0] * xd + global[2];
    let v = global[1] * yd + global[3];
    if u.is_finite() && v.is_finite() {
        (u, v)
    } else {
        (INVALID_RESIDUAL, INVALID_RESIDUAL)
    }
}

fn pose_to_params(pose: &RigidTransform) -> [f64; 6] {
    let axis = Rotation3::from_matrix_unchecked(*pose.rotation()).scaled_axis();
    let t = pose.translation();
    [axis.x, axis.y, axis.z, t.x, t.y, t.z]
}

fn params_to_pose(
    p: &[f64],
    from: FrameId,
    to: FrameId,
) -> Result<RigidTransform, CalibError> {
    let rotation = Rotation3::from_scaled_axis(Vector3::new(p[0], p[1], p[2])).into_inner();
    let translation = Vector3::new(p[3], p[4], p[5]);
    RigidTransform::new(rotation, translation, from, to).map_err(CalibError::Geometry)
}

/// Jointly refine intrinsics, distortion and all board poses of one camera by
/// minimizing the sum of squared reprojection errors over every corner.
///
/// Terminates when the relative cost decrease of an accepted step falls below
/// 1e-12 or after 100 iterations; a rejected step with the damping at its
/// ceiling is a divergence error.
pub fn refine_camera(
    camera_id: &str,
    views: &[CalibrationView],
    initial_intrinsics: &Intrinsics,
    initial_distortion: &Distortion,
    initial_poses: &BTreeMap<String, RigidTransform>,
) -> Result<CameraCalibration, CalibError> {
    let n_views = views.len();
    let total_corners: usize = views.iter().map(|v| v.corners.len()).sum();
    if n_views == 0 || total_corners == 0 {
        return Err(CalibError::InsufficientViews { needed: 1, got: 0 });
    }

    let mut frames = Vec::with_capacity(n_views);
    let mut initial = DVector::zeros(N_GLOBAL + 6 * n_views);
    initial[0] = initial_intrinsics.fx;
    initial[1] = initial_intrinsics.fy;
    initial[2] = initial_intrinsics.cx;
    initial[3] = initial_intrinsics.cy;
    initial[4] = initial_distortion.k1;
    initial[5] = initial_distortion.k2;
    initial[6] = initial_distortion.k3;
    initial[7] = initial_distortion.p1;
    initial[8] = initial_distortion.p2;
    for (i, view) in views.iter().enumerate() {
        let pose = initial_poses.get(&view.view_id).ok_or_else(|| {
            CalibError::Degenerate(format!("no initial pose for view {}", view.view_id))
        })?;
        frames.push((pose.from_frame(), pose.to_frame()));
        initial
            .rows_mut(N_GLOBAL + 6 * i, 6)
            .copy_from_slice(&pose_to_params(pose));
    }

    let residual_fn = |params: &DVector<f64>, out: &mut DVector<f64>| {
        let global = &params.as_slice()[..N_GLOBAL];
        let mut row = 0usize;
        for (i, view) in views.iter().enumerate() {
            let o = N_GLOBAL + 6 * i;
            let rotation = Rotation3::from_scaled_axis(Vector3::new(
                params[o],
                params[o + 1],
                params[o + 2],
            ))
            .into_inner();
            let translation = Vector3::new(params[o + 3], params[o + 4], params[o + 5]);
            for corner in &view.corners {
                let (u, v) = project_raw(global, &rotation, &translation, &corner.board_point);
                out[row] = u - corner.image_point.u;
                out[row + 1] = v - corner.image_point.v;
                row += 2;
            }
        }
    };

    let outcome = lm_solve(
        residual_fn,
        initial,
        2 * total_corners,
        &LmOptions::default(),
    );

    let p = &outcome.params;
    let intrinsics = Intrinsics::new(
        p[0],
        p[1],
        p[2],
        p[3],
        initial_intrinsics.width,
        initial_intrinsics.height,
    )
    .map_err(|e| CalibError::Degenerate(format!("refined intrinsics invalid: {e}")))?;
    let distortion = Distortion::new(p[4], p[5], p[6], p[7], p[8]);
    let mut board_poses = BTreeMap::new();
    for (i, view) in views.iter().enumerate() {
        let (from, to) = frames[i];
        board_poses.insert(
            view.view_id.clone(),
            params_to_pose(&p.as_slice()[N_GLOBAL + 6 * i..N_GLOBAL + 6 * i + 6], from, to)?,
        );
    }
    let mean = mean_reprojection_error(&intrinsics, &distortion, views, &board_poses)?;
    let calib = CameraCalibration {
        camera_id: camera_id.to_string(),
        intrinsics,
        distortion,
        board_poses,
        mean_reprojection_error: mean,
    };

    if outcome.status == LmStatus::Diverged {
        return Err(CalibError::DivergedCamera {
            last: Box::new(calib),
            cost: outcome.cost,
        });
    }
    Ok(calib)
}

/// Full single-camera pipeline: reject undersized views, estimate
/// homographies, closed-form intrinsics, zero initial distortion, per-view
/// poses, then joint refinement.
pub fn calibrate_camera(
    camera_id: &str,
    views: &[CalibrationView],
    width: u32,
    height: u32,
    camera_frame: FrameId,
    view_frames: &BTreeMap<String, FrameId>,
) -> Result<CameraCalibration, CalibError> {
    let mut usable: Vec<&CalibrationView> = views.iter().filter(|v| v.corners.len() >= 4).collect();
    usable.sort_by(|a, b| a.view_id.cmp(&b.view_id));
    if usable.len() < 3 {
        return Err(CalibError::InsufficientViews {
            needed: 3,
            got: usable.len(),
        });
    }

    let mut homographies = Vec::with_capacity(usable.len());
    for view in &usable {
        let board: Vec<Vector2<f64>> = view.corners.iter().map(|c| c.board_point).collect();
        let image: Vec<Vector2<f64>> = view
            .corners
            .iter()
            .map(|c| Vector2::new(c.image_point.u, c.image_point.v))
            .collect();
        homographies.push(estimate_homography(&board, &image)?);
    }
    let intrinsics = intrinsics_from_homographies(&homographies, width, height)?;

    let mut poses = BTreeMap::new();
    for (view, h) in usable.iter().zip(&homographies) {
        let board_frame = *view_frames.get(&view.view_id).ok_or_else(|| {
            CalibError::Degenerate(format!("view '{}' has no registered frame", view.view_id))
        })?;
        poses.insert(
            view.view_id.clone(),
            board_pose_from_homography(h, &intrinsics, board_frame, camera_frame)?,
        );
    }

    let owned: Vec<CalibrationView> = usable.into_iter().cloned().collect();
    refine_camera(camera_id, &owned, &intrinsics, &Distortion::zero(), &poses)
}

/// Fit a single board pose with fixed intrinsics and distortion: homography
/// initialization on undistorted corners, then a 6-parameter refinement
/// against the raw detections.
pub fn fit_board_pose(
    intrinsics: &Intrinsics,
    distortion: &Distortion,
    view: &CalibrationView,
    board_frame: FrameId,
    camera_frame: FrameId,
) -> Result<RigidTransform, CalibError> {
    if view.corners.len() < 4 {
        return Err(CalibError::InsufficientPoints {
            needed: 4,
            got: view.corners.len(),
        });
    }
    let board: Vec<Vector2<f64>> = view.corners.iter().map(|c| c.board_point).collect();
    let undistorted: Vec<Vector2<f64>> = view
        .corners
        .iter()
        .map(|c| {
            let xn = distortion.undistort(&intrinsics.invert(&c.image_point))?;
            let px = intrinsics.apply(&xn);
            Ok(Vector2::new(px.u, px.v))
        })
        .collect::<Result<_, crate::geometry::GeomError>>()?;
    let h = estimate_homography(&board, &undistorted)?;
    let init = board_pose_from_homography(&h, intrinsics, board_frame, camera_frame)?;

    let global = [
        intrinsics.fx,
        intrinsics.fy,
        intrinsics.cx,
        intrinsics.cy,
        distortion.k1,
        distortion.k2,
        distortion.k3,
        distortion.p1,
        distortion.p2,
    ];
    let initial = DVector::from_row_slice(&pose_to_params(&init));
    let outcome = lm_solve(
        |p, out| {
            let rotation =
                Rotation3::from_scaled_axis(Vector3::new(p[0], p[1], p[2])).into_inner();
            let translation = Vector3::new(p[3], p[4], p[5]);
            for (i, corner) in view.corners.iter().enumerate() {
                let (u, v) = project_raw(&global, &rotation, &translation, &corner.board_point);
                out[2 * i] = u - corner.image_point.u;
                out[2 * i + 1] = v - corner.image_point.v;
            }
        },
        initial,
        2 * view.corners.len(),
        &LmOptions::default(),
    );
    if outcome.status == LmStatus::Diverged {
        return Err(CalibError::Diverged {
            what: format!("board pose for view '{}'", view.view_id),
            cost: outcome.cost,
            iterations: outcome.iterations,
        });
    }
    params_to_pose(outcome.params.as_slice(), board_frame, camera_frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::BoardSpec;
    use crate::geometry::PixelCoord;
    use crate::synth::{desk_rig, generate_poses, project_board_views};

    fn views_for(camera_id: &str, views: &[CalibrationView]) -> Vec<CalibrationView> {
        views.iter().filter(|v| v.camera_id == camera_id).cloned().collect()
    }

    fn view_frames(views: &[CalibrationView]) -> BTreeMap<String, FrameId> {
        let mut ids: Vec<String> = views.iter().map(|v| v.view_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids.into_iter()
            .enumerate()
            .map(|(i, id)| (id, FrameId::board(i as u32)))
            .collect()
    }

    #[test]
    fn noiseless_calibration_reaches_machine_precision() {
        let rig = desk_rig(2);
        let board = BoardSpec::new(5, 7, 0.03);
        let poses = generate_poses(&rig, &board, 8, 21).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.0, 0).unwrap();
        let mine = views_for("narrow", &all);
        let frames = view_frames(&mine);
        let truth = &rig.camera("narrow").unwrap().model;
        let calib = calibrate_camera(
            "narrow",
            &mine,
            truth.intrinsics.width,
            truth.intrinsics.height,
            rig.frame_of("narrow").unwrap(),
            &frames,
        )
        .unwrap();
        assert!(calib.mean_reprojection_error < 1e-8, "residual {}", calib.mean_reprojection_error);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
        assert!(rel(calib.intrinsics.fx, truth.intrinsics.fx) < 1e-6);
        assert!(rel(calib.intrinsics.fy, truth.intrinsics.fy) < 1e-6);
        assert!(rel(calib.intrinsics.cx, truth.intrinsics.cx) < 1e-6);
        assert!(rel(calib.intrinsics.cy, truth.intrinsics.cy) < 1e-6);
        assert!((calib.distortion.k1 - truth.distortion.k1).abs() < 1e-6);
        assert!((calib.distortion.p1 - truth.distortion.p1).abs() < 1e-7);
    }

    #[test]
    fn noisy_calibration_residual_band() {
        let rig = desk_rig(2);
        let board = BoardSpec::new(6, 9, 0.025);
        let poses = generate_poses(&rig, &board, 12, 33).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.1, 7).unwrap();
        let mine = views_for("ir", &all);
        let frames = view_frames(&mine);
        let calib = calibrate_camera("ir", &mine, 320, 288, rig.frame_of("ir").unwrap(), &frames)
            .unwrap();
        assert!(
            (0.05..=0.15).contains(&calib.mean_reprojection_error),
            "mean error {}",
            calib.mean_reprojection_error
        );
    }

    #[test]
    fn strong_distortion_recovered_from_zero_init() {
        // True k1 = -0.2; initialization is distortion-free by construction.
        let rig = desk_rig(2);
        let board = BoardSpec::new(6, 9, 0.025);
        let truth = &rig.camera("wide").unwrap().model;
        assert!((truth.distortion.k1 - (-0.12)).abs() < 1e-12); // preset sanity
        let mut builder = crate::rig::RigBuilder::new("ir", rig.roi).ground_z(rig.ground_z);
        for cam in rig.cameras() {
            let distortion = if cam.id == "wide" {
                crate::geometry::Distortion::new(-0.2, 0.0, 0.0, 0.0, 0.0)
            } else {
                cam.model.distortion
            };
            builder = builder.camera(
                &cam.id,
                &cam.modality,
                cam.model.intrinsics,
                distortion,
                *cam.model.from_depth.rotation(),
                *cam.model.from_depth.translation(),
            );
        }
        let rig = builder.build().unwrap();
        let poses = generate_poses(&rig, &board, 10, 5).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.0, 0).unwrap();
        let mine = views_for("wide", &all);
        let frames = view_frames(&mine);
        let calib = calibrate_camera("wide", &mine, 224, 224, rig.frame_of("wide").unwrap(), &frames)
            .unwrap();
        assert!(
            (calib.distortion.k1 - (-0.2)).abs() < 0.05 * 0.2,
            "k1 = {}",
            calib.distortion.k1
        );
    }

    #[test]
    fn refinement_does_not_increase_the_initial_cost() {
        let rig = desk_rig(4);
        let board = BoardSpec::new(5, 7, 0.03);
        let poses = generate_poses(&rig, &board, 6, 55).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.3, 3).unwrap();
        let mine = views_for("ir", &all);
        let frames = view_frames(&mine);
        let truth = &rig.camera("ir").unwrap().model;

        // Initial estimate: truth perturbed, zero distortion.
        let init_intr = Intrinsics::new(
            truth.intrinsics.fx * 1.03,
            truth.intrinsics.fy * 0.97,
            truth.intrinsics.cx + 2.0,
            truth.intrinsics.cy - 1.5,
            truth.intrinsics.width,
            truth.intrinsics.height,
        )
        .unwrap();
        let mut init_poses = BTreeMap::new();
        for v in &mine {
            let board_pts: Vec<Vector2<f64>> = v.corners.iter().map(|c| c.board_point).collect();
            let img: Vec<Vector2<f64>> = v
                .corners
                .iter()
                .map(|c| Vector2::new(c.image_point.u, c.image_point.v))
                .collect();
            let h = estimate_homography(&board_pts, &img).unwrap();
            init_poses.insert(
                v.view_id.clone(),
                board_pose_from_homography(&h, &init_intr, frames[&v.view_id], rig.frame_of("ir").unwrap()).unwrap(),
            );
        }
        let initial_error = mean_reprojection_error(
            &init_intr,
            &Distortion::zero(),
            &mine,
            &init_poses,
        )
        .unwrap();
        let calib =
            refine_camera("ir", &mine, &init_intr, &Distortion::zero(), &init_poses).unwrap();
        assert!(
            calib.mean_reprojection_error <= initial_error,
            "refined {} vs initial {initial_error}",
            calib.mean_reprojection_error
        );
    }

    #[test]
    fn reported_mean_matches_naive_recomputation() {
        let rig = desk_rig(4);
        let board = BoardSpec::new(5, 7, 0.03);
        let poses = generate_poses(&rig, &board, 6, 89).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.2, 13).unwrap();
        let mine = views_for("narrow", &all);
        let frames = view_frames(&mine);
        let calib = calibrate_camera("narrow", &mine, 128, 96, rig.frame_of("narrow").unwrap(), &frames)
            .unwrap();

        // Naive recomputation straight from the model formulas.
        let k = &calib.intrinsics;
        let d = &calib.distortion;
        let mut sum = 0.0;
        let mut count = 0usize;
        for view in &mine {
            let pose = &calib.board_poses[&view.view_id];
            for c in &view.corners {
                let p = pose.rotation() * Vector3::new(c.board_point.x, c.board_point.y, 0.0)
                    + pose.translation();
                let x = p.x / p.z;
                let y = p.y / p.z;
                let r2 = x * x + y * y;
                let radial = 1.0 + d.k1 * r2 + d.k2 * r2 * r2 + d.k3 * r2 * r2 * r2;
                let xd = x * radial + 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x);
                let yd = y * radial + d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y;
                let proj = PixelCoord::new(k.fx * xd + k.cx, k.fy * yd + k.cy);
                sum += proj.distance(&c.image_point);
                count += 1;
            }
        }
        let naive = sum / count as f64;
        assert!(
            (naive - calib.mean_reprojection_error).abs() <= 1e-12,
            "naive {naive} vs reported {}",
            calib.mean_reprojection_error
        );
    }

    #[test]
    fn pose_fit_recovers_known_pose_under_distortion() {
        let rig = desk_rig(2);
        let board = BoardSpec::new(6, 9, 0.025);
        let poses = generate_poses(&rig, &board, 3, 71).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.0, 0).unwrap();
        let cam = rig.camera("wide").unwrap();
        let view = all
            .iter()
            .find(|v| v.camera_id == "wide" && v.view_id == "v000")
            .unwrap();
        let fitted = fit_board_pose(
            &cam.model.intrinsics,
            &cam.model.distortion,
            view,
            FrameId::board(0),
            rig.frame_of("wide").unwrap(),
        )
        .unwrap();
        // Truth: board pose composed with the camera's rig transform.
        let truth = cam.model.from_depth.compose(&poses[0]).unwrap();
        assert!((fitted.rotation() - truth.rotation()).norm() < 1e-8);
        assert!((fitted.translation() - truth.translation()).norm() < 1e-8);
    }
}
