//! Quantitative evaluation: intrinsic reprojection error, epipolar
//! (extrinsic) error, ray-cast depth error, and resolution normalization.

use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::calib::{CalibError, CalibrationView, CameraCalibration};
use crate::geometry::{GeomError, PixelCoord, Point3};
use crate::mesh::{build_object_mesh, vertices_from_depth, DepthMap, MeshError, Roi};
use crate::raycast::{Bvh, Ray};
use crate::rig::{CameraModel, CameraRig, RigError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no corners to evaluate")]
    NoCorners,
    #[error("no shared views between '{0}' and '{1}'")]
    NoSharedViews(String, String),
    #[error("missing depth map for view '{0}'")]
    MissingDepth(String),
    #[error(transparent)]
    Calib(#[from] CalibError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Rig(#[from] RigError),
}

/// One evaluated corner.
#[derive(Clone, Debug)]
pub struct CornerResidual {
    pub view_id: String,
    pub board_row: u32,
    pub board_col: u32,
    pub value_px: f64,
}

/// Mean error plus the raw per-corner residuals behind it.
#[derive(Clone, Debug, Default)]
pub struct MetricOutcome {
    pub mean_px: f64,
    pub count: usize,
    pub skipped: usize,
    pub residuals: Vec<CornerResidual>,
    /// Views where more than half the corners could not be evaluated.
    pub invalid_views: Vec<String>,
}

impl MetricOutcome {
    fn finish(mut self) -> Result<Self, MetricsError> {
        if self.count == 0 {
            return Err(MetricsError::NoCorners);
        }
        self.mean_px = self.residuals.iter().map(|r| r.value_px).sum::<f64>() / self.count as f64;
        Ok(self)
    }
}

/// Resolution normalization: pixel errors become comparable across cameras
/// by scaling with 1000 / sqrt(h * w) of the image they are measured in.
pub fn normalize_error(err_px: f64, width: u32, height: u32) -> f64 {
    err_px * 1000.0 / ((width as f64) * (height as f64)).sqrt()
}

/// Mean Euclidean distance between reprojected board corners and detections,
/// over all corners of all views of one camera.
pub fn intrinsic_error(
    calib: &CameraCalibration,
    views: &[CalibrationView],
) -> Result<MetricOutcome, MetricsError> {
    let mut out = MetricOutcome::default();
    for view in views {
        let Some(pose) = calib.board_poses.get(&view.view_id) else {
            out.skipped += view.corners.len();
            continue;
        };
        for corner in &view.corners {
            let proj = crate::calib::project_board_point(
                &calib.intrinsics,
                &calib.distortion,
                pose,
                &corner.board_point,
            )?;
            out.residuals.push(CornerResidual {
                view_id: view.view_id.clone(),
                board_row: corner.board_row,
                board_col: corner.board_col,
                value_px: proj.distance(&corner.image_point),
            });
            out.count += 1;
        }
    }
    out.finish()
}

/// Undistorted pixel position of a detected corner.
fn undistorted_pixel(model: &CameraModel, px: &PixelCoord) -> Result<PixelCoord, GeomError> {
    let xn = model.distortion.undistort(&model.intrinsics.invert(px))?;
    Ok(model.intrinsics.apply(&xn))
}

/// Epipolar (extrinsic) error from `origin` into `dest`: for every shared
/// corner, the perpendicular distance between the corner detected in `dest`
/// and the projection of the origin pixel's viewing ray, both taken in
/// undistorted coordinates. The ray is sampled at depths `z_near`/`z_far`;
/// if both samples project onto the same point (the epipole), the distance
/// to that point is used.
pub fn extrinsic_error(
    origin: &CameraModel,
    dest: &CameraModel,
    origin_views: &[CalibrationView],
    dest_views: &[CalibrationView],
    z_near: f64,
    z_far: f64,
) -> Result<MetricOutcome, MetricsError> {
    let pair = pair_views(origin_views, dest_views)?;
    // Transform from the origin camera's frame to the destination camera's.
    let to_dest = dest.from_depth.compose(&origin.from_depth.invert())?;

    let mut out = MetricOutcome::default();
    for (view_id, origin_view, dest_view) in pair {
        let mut view_skipped = 0usize;
        let by_pos: BTreeMap<(u32, u32), &crate::calib::CornerObservation> = dest_view
            .corners
            .iter()
            .map(|c| ((c.board_row, c.board_col), c))
            .collect();
        let total = origin_view.corners.len();
        for corner in &origin_view.corners {
            let Some(dest_corner) = by_pos.get(&(corner.board_row, corner.board_col)) else {
                view_skipped += 1;
                continue;
            };
            let xn = match origin
                .distortion
                .undistort(&origin.intrinsics.invert(&corner.image_point))
            {
                Ok(x) => x,
                Err(_) => {
                    view_skipped += 1;
                    continue;
                }
            };
            let dir = Vector3::new(xn.x, xn.y, 1.0);
            let mut samples = Vec::with_capacity(2);
            for z in [z_near, z_far] {
                let p = Point3::from_vector(dir * z, to_dest.from_frame());
                let q = to_dest.apply(&p)?;
                if q.z() <= 0.0 {
                    break;
                }
                samples.push(dest.intrinsics.apply(&Vector2::new(
                    q.x() / q.z(),
                    q.y() / q.z(),
                )));
            }
            if samples.len() != 2 {
                view_skipped += 1;
                continue;
            }
            let detected = undistorted_pixel(dest, &dest_corner.image_point)?;
            let a = samples[0];
            let b = samples[1];
            let du = b.u - a.u;
            let dv = b.v - a.v;
            let len = (du * du + dv * dv).sqrt();
            let dist = if len < 1e-9 {
                // Degenerate epipolar line: the corner sits on the baseline
                // axis and the whole ray projects onto the epipole.
                detected.distance(&a)
            } else {
                ((detected.u - a.u) * dv - (detected.v - a.v) * du).abs() / len
            };
            out.residuals.push(CornerResidual {
                view_id: view_id.clone(),
                board_row: corner.board_row,
                board_col: corner.board_col,
                value_px: dist,
            });
            out.count += 1;
        }
        out.skipped += view_skipped;
        if view_skipped * 2 > total {
            out.invalid_views.push(view_id.clone());
        }
    }
    out.finish()
}

/// Per-view acceleration structures over the depth-map meshes used by the
/// ray-cast depth error. The board is near planar, so the vertical-angle
/// filter is disabled.
pub fn board_meshes(
    depth_maps: &BTreeMap<String, DepthMap>,
    roi: &Roi,
    frame: crate::geometry::FrameId,
) -> BTreeMap<String, Bvh> {
    depth_maps
        .iter()
        .map(|(view_id, dm)| {
            let grid = vertices_from_depth(dm, roi, frame);
            let mesh = build_object_mesh(&grid, f64::INFINITY);
            (view_id.clone(), Bvh::build(&mesh))
        })
        .collect()
}

/// Ray-cast depth error from `origin` into `dest`: every shared corner is
/// mapped through the full registration path (undistort, cast into the
/// per-view depth mesh, transform, project with distortion) and compared
/// with the raw detection in `dest`. Corners whose ray misses the mesh are
/// skipped and counted; a view with more than half misses is flagged.
pub fn depth_error(
    origin: &CameraModel,
    dest: &CameraModel,
    origin_views: &[CalibrationView],
    dest_views: &[CalibrationView],
    meshes: &BTreeMap<String, Bvh>,
) -> Result<MetricOutcome, MetricsError> {
    let pair = pair_views(origin_views, dest_views)?;
    let mut out = MetricOutcome::default();
    for (view_id, origin_view, dest_view) in pair {
        let Some(bvh) = meshes.get(&view_id) else {
            return Err(MetricsError::MissingDepth(view_id));
        };
        let by_pos: BTreeMap<(u32, u32), &crate::calib::CornerObservation> = dest_view
            .corners
            .iter()
            .map(|c| ((c.board_row, c.board_col), c))
            .collect();
        let mut view_skipped = 0usize;
        let total = origin_view.corners.len();
        for corner in &origin_view.corners {
            let Some(dest_corner) = by_pos.get(&(corner.board_row, corner.board_col)) else {
                view_skipped += 1;
                continue;
            };
            let mapped = (|| -> Option<PixelCoord> {
                let (ray_origin, dir) = origin.pixel_ray_in_depth(&corner.image_point).ok()?;
                let ray = Ray::new(ray_origin, dir, 0.0, f64::INFINITY);
                let hit = bvh.intersect_first(&ray)?;
                dest.project_from_depth(&hit.point).ok()?
            })();
            match mapped {
                Some(px) => {
                    out.residuals.push(CornerResidual {
                        view_id: view_id.clone(),
                        board_row: corner.board_row,
                        board_col: corner.board_col,
                        value_px: px.distance(&dest_corner.image_point),
                    });
                    out.count += 1;
                }
                None => view_skipped += 1,
            }
        }
        out.skipped += view_skipped;
        if view_skipped * 2 > total {
            out.invalid_views.push(view_id.clone());
        }
    }
    out.finish()
}

/// Shared views of two cameras, matched by view id, sorted.
fn pair_views<'a>(
    origin_views: &'a [CalibrationView],
    dest_views: &'a [CalibrationView],
) -> Result<Vec<(String, &'a CalibrationView, &'a CalibrationView)>, MetricsError> {
    let dest_by_id: BTreeMap<&str, &CalibrationView> = dest_views
        .iter()
        .map(|v| (v.view_id.as_str(), v))
        .collect();
    let mut shared: Vec<(String, &CalibrationView, &CalibrationView)> = origin_views
        .iter()
        .filter_map(|ov| {
            dest_by_id
                .get(ov.view_id.as_str())
                .map(|dv| (ov.view_id.clone(), ov, *dv))
        })
        .collect();
    shared.sort_by(|a, b| a.0.cmp(&b.0));
    if shared.is_empty() {
        let a = origin_views.first().map(|v| v.camera_id.clone()).unwrap_or_default();
        let b = dest_views.first().map(|v| v.camera_id.clone()).unwrap_or_default();
        return Err(MetricsError::NoSharedViews(a, b));
    }
    Ok(shared)
}

/// Per-camera block of the evaluation report.
#[derive(Clone, Debug)]
pub struct CameraReport {
    pub camera_id: String,
    pub width: u32,
    pub height: u32,
    pub intrinsic: MetricOutcome,
}

/// Per ordered camera pair block of the evaluation report.
#[derive(Clone, Debug)]
pub struct PairReport {
    pub origin: String,
    pub dest: String,
    pub dest_width: u32,
    pub dest_height: u32,
    pub extrinsic: MetricOutcome,
    pub depth: Option<MetricOutcome>,
}

/// The full evaluation: per-camera intrinsic errors plus per-ordered-pair
/// extrinsic and (optional) depth errors, raw and normalized.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub cameras: Vec<CameraReport>,
    pub pairs: Vec<PairReport>,
    pub z_near: f64,
    pub z_far: f64,
}

/// Run the whole evaluation over a calibrated rig and corner observations.
/// Board poses are fitted per camera and view with the rig's parameters
/// held fixed. Depth maps, when provided, are keyed by view id and enable
/// the ray-cast depth error.
pub fn evaluate(
    rig: &CameraRig,
    views: &[CalibrationView],
    depth_maps: Option<&BTreeMap<String, DepthMap>>,
    z_near: f64,
    z_far: f64,
) -> Result<ErrorReport, MetricsError> {
    let mut by_camera: BTreeMap<String, Vec<CalibrationView>> = BTreeMap::new();
    let mut view_ids: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for v in views {
        view_ids.insert(v.view_id.clone());
        by_camera.entry(v.camera_id.clone()).or_default().push(v.clone());
    }
    let view_frames: BTreeMap<String, crate::geometry::FrameId> = view_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), crate::geometry::FrameId::board(i as u32)))
        .collect();

    let mut cameras = Vec::new();
    let mut calibs: BTreeMap<String, CameraCalibration> = BTreeMap::new();
    for (camera_id, cam_views) in &by_camera {
        let cam = rig.camera(camera_id)?;
        let mut poses = BTreeMap::new();
        for view in cam_views {
            let pose = crate::calib::fit_board_pose(
                &cam.model.intrinsics,
                &cam.model.distortion,
                view,
                view_frames[&view.view_id],
                rig.frame_of(camera_id)?,
            )?;
            poses.insert(view.view_id.clone(), pose);
        }
        let mean = crate::calib::mean_reprojection_error(
            &cam.model.intrinsics,
            &cam.model.distortion,
            cam_views,
            &poses,
        )?;
        let calib = CameraCalibration {
            camera_id: camera_id.clone(),
            intrinsics: cam.model.intrinsics,
            distortion: cam.model.distortion,
            board_poses: poses,
            mean_reprojection_error: mean,
        };
        let intrinsic = intrinsic_error(&calib, cam_views)?;
        cameras.push(CameraReport {
            camera_id: camera_id.clone(),
            width: cam.model.intrinsics.width,
            height: cam.model.intrinsics.height,
            intrinsic,
        });
        calibs.insert(camera_id.clone(), calib);
    }

    let meshes = depth_maps.map(|dm| board_meshes(dm, &rig.roi, rig.depth_frame()));

    let ids: Vec<String> = by_camera.keys().cloned().collect();
    let mut pairs = Vec::new();
    for origin_id in &ids {
        for dest_id in &ids {
            if origin_id == dest_id {
                continue;
            }
            let origin = &rig.camera(origin_id)?.model;
            let dest = &rig.camera(dest_id)?.model;
            let extrinsic = extrinsic_error(
                origin,
                dest,
                &by_camera[origin_id],
                &by_camera[dest_id],
                z_near,
                z_far,
            )?;
            let depth = match &meshes {
                Some(m) => Some(depth_error(
                    origin,
                    dest,
                    &by_camera[origin_id],
                    &by_camera[dest_id],
                    m,
                )?),
                None => None,
            };
            pairs.push(PairReport {
                origin: origin_id.clone(),
                dest: dest_id.clone(),
                dest_width: dest.intrinsics.width,
                dest_height: dest.intrinsics.height,
                extrinsic,
                depth,
            });
        }
    }

    Ok(ErrorReport {
        cameras,
        pairs,
        z_near,
        z_far,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::BoardSpec;
    use crate::geometry::{Distortion, Intrinsics};
    use crate::rig::RigBuilder;
    use crate::synth::{
        board_primitive, desk_rig, desk_rig_zero_distortion, generate_poses,
        project_board_views, render_depth, DepthRenderOptions, Scene, Texture,
    };
    use nalgebra::Matrix3;

    /// Truth calibration assembled straight from the rig (no estimation).
    fn truth_calibration(
        rig: &crate::rig::CameraRig,
        camera_id: &str,
        poses: &[crate::geometry::RigidTransform],
        views: &[CalibrationView],
    ) -> CameraCalibration {
        let cam = rig.camera(camera_id).unwrap();
        let mut board_poses = BTreeMap::new();
        for (i, pose) in poses.iter().enumerate() {
            board_poses.insert(
                format!("v{i:03}"),
                cam.model.from_depth.compose(pose).unwrap(),
            );
        }
        let mean = crate::calib::mean_reprojection_error(
            &cam.model.intrinsics,
            &cam.model.distortion,
            views,
            &board_poses,
        )
        .unwrap();
        CameraCalibration {
            camera_id: camera_id.into(),
            intrinsics: cam.model.intrinsics,
            distortion: cam.model.distortion,
            board_poses,
            mean_reprojection_error: mean,
        }
    }

    fn views_for(camera_id: &str, views: &[CalibrationView]) -> Vec<CalibrationView> {
        views.iter().filter(|v| v.camera_id == camera_id).cloned().collect()
    }

    #[test]
    fn normalization_formula() {
        // Unit image.
        assert!((normalize_error(1.0, 1000, 1000) - 1.0).abs() < 1e-12);
        // Spot checks against published raw/normalized value pairs.
        assert!((normalize_error(0.55, 3840, 2160) - 0.19).abs() < 0.005);
        assert!((normalize_error(0.93, 640, 480) - 1.67).abs() < 0.011);
        assert!((normalize_error(1.16, 512, 512) - 2.26).abs() < 0.011);
        // Linearity.
        let e = normalize_error(0.37, 640, 576);
        assert_eq!(normalize_error(3.0 * 0.37, 640, 576), 3.0 * e);
    }

    #[test]
    fn intrinsic_error_is_zero_for_exact_data_and_matches_naive_mean() {
        let rig = desk_rig(4);
        let board = BoardSpec::new(5, 7, 0.03);
        let poses = generate_poses(&rig, &board, 5, 2).unwrap();
        let noiseless = project_board_views(&rig, &board, &poses, 0.0, 0).unwrap();
        let views = views_for("ir", &noiseless);
        let calib = truth_calibration(&rig, "ir", &poses, &views);
        let out = intrinsic_error(&calib, &views).unwrap();
        assert!(out.mean_px < 1e-8, "mean {}", out.mean_px);

        let noisy_views: Vec<CalibrationView> =
            views_for("ir", &project_board_views(&rig, &board, &poses, 0.1, 5).unwrap());
        let calib2 = truth_calibration(&rig, "ir", &poses, &noisy_views);
        let out2 = intrinsic_error(&calib2, &noisy_views).unwrap();
        let naive: f64 = out2.residuals.iter().map(|r| r.value_px).sum::<f64>()
            / out2.residuals.len() as f64;
        assert!((out2.mean_px - naive).abs() < 1e-12);
        // With truth parameters the residual is the injected noise itself:
        // mean |N(0, 0.1)^2| in 2D is sigma * sqrt(pi/2) ~ 0.125.
        assert!((0.05..=0.2).contains(&out2.mean_px), "mean {}", out2.mean_px);
    }

    #[test]
    fn extrinsic_error_vanishes_on_exact_data() {
        let rig = desk_rig(2);
        let board = BoardSpec::new(6, 9, 0.025);
        let poses = generate_poses(&rig, &board, 6, 9).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.0, 0).unwrap();
        let origin = &rig.camera("ir").unwrap().model;
        let dest = &rig.camera("wide").unwrap().model;
        let out = extrinsic_error(
            origin,
            dest,
            &views_for("ir", &all),
            &views_for("wide", &all),
            rig.roi.z_min,
            rig.roi.z_max,
        )
        .unwrap();
        assert!(out.mean_px < 1e-8, "mean {}", out.mean_px);
        assert_eq!(out.skipped, 0);
    }

    #[test]
    fn epipole_degeneracy_uses_point_distance() {
        // Pure lateral translation: a corner on the baseline axis projects
        // onto the epipole for every depth.
        let intr = Intrinsics::new(200.0, 200.0, 100.0, 100.0, 200, 200).unwrap();
        let rig = RigBuilder::new("a", Roi::new([-1.0, 1.0], [-1.0, 1.0], [0.1, 3.0]).unwrap())
            .camera("a", "x", intr, Distortion::zero(), Matrix3::identity(), nalgebra::Vector3::zeros())
            .camera(
                "b",
                "y",
                intr,
                Distortion::zero(),
                Matrix3::identity(),
                nalgebra::Vector3::new(-0.2, 0.0, 0.0),
            )
            .build()
            .unwrap();
        let a = &rig.camera("a").unwrap().model;
        let b = &rig.camera("b").unwrap().model;

        // One corner exactly along the baseline (the x axis): direction
        // (1, 0, 0) never leaves the axis, so both depth samples project to
        // the epipole in b. Another corner provides a second observation.
        let make_view = |camera_id: &str, pts: &[(f64, f64)]| CalibrationView {
            camera_id: camera_id.into(),
            view_id: "v0".into(),
            corners: pts
                .iter()
                .enumerate()
                .map(|(i, (u, v))| crate::calib::CornerObservation {
                    board_row: 0,
                    board_col: i as u32,
                    board_point: Vector2::new(i as f64 * 0.03, 0.0),
                    image_point: PixelCoord::new(*u, *v),
                })
                .collect(),
        };
        // 3D point P = (0.5, 0, 1.0): in a it projects to (200, 100).
        // Direction of that pixel: (0.5, 0, 1)/|.|; the ray x(t) = t*(0.5,0,1)
        // maps in b to u(t) = 200*(0.5t - 0.2)/t + 100 — NOT the epipole.
        // A pixel at the epipole direction: u_a such that dir || t_ab:
        // t_ab in a->b is (-0.2, 0, 0), parallel to (1, 0, 0): the point at
        // infinity of that direction projects to u = cx + fx*inf... instead
        // the degenerate ray is dir = (1,0,0), which has z = 0, so both
        // depth samples sit behind the camera and the corner is skipped.
        // The practical degeneracy: dir nearly parallel to the baseline in
        // projection, i.e. epipolar segment shorter than 1e-9 px. Construct
        // it directly: a corner whose undistorted position equals where both
        // samples coincide. With pure x translation, sample u in b is
        // u(z) = fx*(x*z - 0.2)/z... varies with z unless x*z term
        // dominates; exact coincidence happens for the point at infinity
        // only, so emulate the degenerate case with z_near == z_far.
        let va = make_view("a", &[(200.0, 100.0), (150.0, 100.0)]);
        let vb = make_view("b", &[(180.0, 100.0), (140.0, 100.0)]);
        let out = extrinsic_error(a, b, &[va], &[vb], 1.0, 1.0).unwrap();
        // Both samples at z = 1 coincide: distances become point distances.
        // Corner 0: ray (0.5,0,1) at z=1 -> (0.3, 0, 1) in b -> u = 160.
        assert!((out.residuals[0].value_px - 20.0).abs() < 1e-9);
        assert_eq!(out.count, 2);
    }

    #[test]
    fn depth_error_is_tiny_on_exact_data_and_bounds_extrinsic_error() {
        let rig = desk_rig_zero_distortion(2);
        let board = BoardSpec::new(6, 9, 0.025);
        let poses = generate_poses(&rig, &board, 6, 9).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.0, 0).unwrap();
        let origin = &rig.camera("ir").unwrap().model;
        let dest = &rig.camera("wide").unwrap().model;

        // Exact per-view depth maps of the physical board.
        let mut depth_maps = BTreeMap::new();
        for (i, pose) in poses.iter().enumerate() {
            let scene = Scene {
                primitives: vec![(board_primitive(&board, pose), Texture::Constant { value: 0.5 })],
                ground_z: rig.ground_z,
            };
            let dm = render_depth(&scene, &rig.depth_camera().model, &DepthRenderOptions::default())
                .unwrap();
            depth_maps.insert(format!("v{i:03}"), dm);
        }
        let meshes = board_meshes(&depth_maps, &rig.roi, rig.depth_frame());

        let ir_views = views_for("ir", &all);
        let wide_views = views_for("wide", &all);
        let depth = depth_error(origin, dest, &ir_views, &wide_views, &meshes).unwrap();
        assert!(depth.mean_px < 1e-6, "depth error {}", depth.mean_px);
        assert!(depth.invalid_views.is_empty());

        // Per-corner: the epipolar distance is a lower bound on the mapped
        // distance (zero-distortion data).
        let extr = extrinsic_error(origin, dest, &ir_views, &wide_views, rig.roi.z_min, rig.roi.z_max)
            .unwrap();
        let by_key = |out: &MetricOutcome| -> BTreeMap<(String, u32, u32), f64> {
            out.residuals
                .iter()
                .map(|r| ((r.view_id.clone(), r.board_row, r.board_col), r.value_px))
                .collect()
        };
        let d = by_key(&depth);
        let e = by_key(&extr);
        let mut compared = 0;
        for (key, de) in &e {
            if let Some(dd) = d.get(key) {
                assert!(*de <= dd + 1e-9, "corner {key:?}: epipolar {de} > depth {dd}");
                compared += 1;
            }
        }
        assert!(compared > 100);
    }

    #[test]
    fn biased_depth_hurts_wide_baselines_more() {
        let rig = desk_rig_zero_distortion(2);
        let board = BoardSpec::new(6, 9, 0.025);
        let poses = generate_poses(&rig, &board, 5, 13).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.0, 0).unwrap();
        let origin = &rig.camera("ir").unwrap().model;

        // Bias every depth by +5 mm.
        let mut depth_maps = BTreeMap::new();
        for (i, pose) in poses.iter().enumerate() {
            let scene = Scene {
                primitives: vec![(board_primitive(&board, pose), Texture::Constant { value: 0.5 })],
                ground_z: rig.ground_z,
            };
            let mut dm =
                render_depth(&scene, &rig.depth_camera().model, &DepthRenderOptions::default())
                    .unwrap();
            for row in 0..dm.height {
                for col in 0..dm.width {
                    if let Some(d) = dm.get(col, row) {
                        dm.set(col, row, d + 0.005).unwrap();
                    }
                }
            }
            depth_maps.insert(format!("v{i:03}"), dm);
        }
        let meshes = board_meshes(&depth_maps, &rig.roi, rig.depth_frame());
        let ir_views = views_for("ir", &all);
        let narrow = depth_error(
            origin,
            &rig.camera("narrow").unwrap().model,
            &ir_views,
            &views_for("narrow", &all),
            &meshes,
        )
        .unwrap();
        let wide = depth_error(
            origin,
            &rig.camera("wide").unwrap().model,
            &ir_views,
            &views_for("wide", &all),
            &meshes,
        )
        .unwrap();
        assert!(
            wide.mean_px > narrow.mean_px,
            "wide {} vs narrow {}",
            wide.mean_px,
            narrow.mean_px
        );
    }

    #[test]
    fn ray_misses_are_counted_and_views_flagged() {
        let rig = desk_rig_zero_distortion(4);
        let board = BoardSpec::new(5, 7, 0.03);
        let poses = generate_poses(&rig, &board, 3, 31).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.0, 0).unwrap();
        // Empty depth maps: every ray misses.
        let mut depth_maps = BTreeMap::new();
        for i in 0..poses.len() {
            depth_maps.insert(
                format!("v{i:03}"),
                DepthMap::new(rig.depth_camera().model.intrinsics),
            );
        }
        let meshes = board_meshes(&depth_maps, &rig.roi, rig.depth_frame());
        let err = depth_error(
            &rig.camera("ir").unwrap().model,
            &rig.camera("wide").unwrap().model,
            &views_for("ir", &all),
            &views_for("wide", &all),
            &meshes,
        );
        assert!(matches!(err, Err(MetricsError::NoCorners)));
    }

    #[test]
    fn evaluate_produces_full_tables_on_exact_data() {
        let rig = desk_rig(4);
        let board = BoardSpec::new(5, 7, 0.03);
        let poses = generate_poses(&rig, &board, 5, 3).unwrap();
        let all = project_board_views(&rig, &board, &poses, 0.0, 0).unwrap();
        let mut depth_maps = BTreeMap::new();
        for (i, pose) in poses.iter().enumerate() {
            let scene = Scene {
                primitives: vec![(board_primitive(&board, pose), Texture::Constant { value: 0.5 })],
                ground_z: rig.ground_z,
            };
            depth_maps.insert(
                format!("v{i:03}"),
                render_depth(&scene, &rig.depth_camera().model, &DepthRenderOptions::default())
                    .unwrap(),
            );
        }
        let report = evaluate(&rig, &all, Some(&depth_maps), rig.roi.z_min, rig.roi.z_max)
            .unwrap();
        assert_eq!(report.cameras.len(), 3);
        assert_eq!(report.pairs.len(), 6);
        for cam in &report.cameras {
            assert!(cam.intrinsic.mean_px < 1e-6, "{}: {}", cam.camera_id, cam.intrinsic.mean_px);
        }
        for pair in &report.pairs {
            assert!(pair.extrinsic.mean_px < 1e-6);
            let d = pair.depth.as_ref().unwrap();
            // Distorted satellites add a hair of undistortion tolerance.
            assert!(d.mean_px < 1e-5, "{}->{}: {}", pair.origin, pair.dest, d.mean_px);
        }
    }
}
