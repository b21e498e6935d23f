//! Pairwise rig extrinsics from shared board views.

use nalgebra::{DVector, Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};

use super::lm::{lm_solve, LmOptions, LmStatus};
use super::{CalibError, CalibrationView, CameraCalibration};
use crate::geometry::RigidTransform;

/// Chordal mean of a set of rotations: the quaternion maximizing the summed
/// squared dot products, i.e. the dominant eigenvector of sum(q q^T).
/// Antipodal quaternion sign flips do not affect the result.
pub fn chordal_mean_rotation(rotations: &[Matrix3<f64>]) -> Matrix3<f64> {
    assert!(!rotations.is_empty());
    let mut acc = Matrix4::<f64>::zeros();
    for r in rotations {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
        let c = q.as_vector(); // [i, j, k, w]
        acc += c * c.transpose();
    }
    let eigen = nalgebra::SymmetricEigen::new(acc);
    let mut best = 0;
    for i in 1..4 {
        if eigen.eigenvalues[i] > eigen.eigenvalues[best] {
            best = i;
        }
    }
    let v = eigen.eigenvectors.column(best);
    let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(v[3], v[0], v[1], v[2]));
    *q.to_rotation_matrix().matrix()
}

/// Rigid transform from camera A's frame to camera B's frame.
///
/// Per shared view the relative pose is `poseB ∘ invert(poseA)`; rotations
/// are averaged by chordal mean and translations arithmetically, then the
/// six parameters are refined jointly against camera B's detected corners
/// across all shared views.
pub fn stereo_extrinsics(
    a: &CameraCalibration,
    views_a: &[CalibrationView],
    b: &CameraCalibration,
    views_b: &[CalibrationView],
) -> Result<RigidTransform, CalibError> {
    let shared: Vec<&str> = a
        .board_poses
        .keys()
        .filter(|id| b.board_poses.contains_key(*id))
        .map(|s| s.as_str())
        .collect();
    if shared.is_empty() {
        return Err(CalibError::NoSharedViews(
            a.camera_id.clone(),
            b.camera_id.clone(),
        ));
    }

    let mut rotations = Vec::with_capacity(shared.len());
    let mut translations = Vec::with_capacity(shared.len());
    for id in &shared {
        let pose_a = &a.board_poses[*id];
        let pose_b = &b.board_poses[*id];
        let m = pose_b.compose(&pose_a.invert())?;
        rotations.push(*m.rotation());
        translations.push(*m.translation());
    }
    let mean_r = chordal_mean_rotation(&rotations);
    let mean_t = translations.iter().sum::<Vector3<f64>>() / translations.len() as f64;
    let init = RigidTransform::new(
        mean_r,
        mean_t,
        a.board_poses[shared[0]].to_frame(),
        b.board_poses[shared[0]].to_frame(),
    )
    .map_err(CalibError::Geometry)?;

    // Degenerate fallback: with a single shared view the average is already
    // the exact relative pose; refinement still runs but is a no-op on
    // noiseless data.
    let targets: Vec<&CalibrationView> = shared
        .iter()
        .filter_map(|id| {
            views_b
                .iter()
                .find(|v| v.view_id == **id && v.camera_id == b.camera_id)
        })
        .collect();
    let total: usize = targets.iter().map(|v| v.corners.len()).sum();
    let _ = views_a;
    if total == 0 {
        return Ok(init);
    }

    let global = [
        b.intrinsics.fx,
        b.intrinsics.fy,
        b.intrinsics.cx,
        b.intrinsics.cy,
        b.distortion.k1,
        b.distortion.k2,
        b.distortion.k3,
        b.distortion.p1,
        b.distortion.p2,
    ];
    let axis = Rotation3::from_matrix_unchecked(*init.rotation()).scaled_axis();
    let t0 = init.translation();
    let initial = DVector::from_vec(vec![axis.x, axis.y, axis.z, t0.x, t0.y, t0.z]);

    let outcome = lm_solve(
        |p, out| {
            let rot = Rotation3::from_scaled_axis(Vector3::new(p[0], p[1], p[2])).into_inner();
            let t = Vector3::new(p[3], p[4], p[5]);
            let mut row = 0usize;
            for view in &targets {
                let pose_a = &a.board_poses[view.view_id.as_str()];
                let combined_r = rot * pose_a.rotation();
                let combined_t = rot * pose_a.translation() + t;
                for corner in &view.corners {
                    let (u, v) = super::refine::project_raw(
                        &global,
                        &combined_r,
                        &combined_t,
                        &corner.board_point,
                    );
                    out[row] = u - corner.image_point.u;
                    out[row + 1] = v - corner.image_point.v;
                    row += 2;
                }
            }
        },
        initial,
        2 * total,
        &LmOptions::default(),
    );
    if outcome.status == LmStatus::Diverged {
        return Err(CalibError::Diverged {
            what: format!(
                "pair extrinsics '{}' -> '{}'",
                a.camera_id, b.camera_id
            ),
            cost: outcome.cost,
            iterations: outcome.iterations,
        });
    }
    let p = outcome.params;
    let rot = Rotation3::from_scaled_axis(Vector3::new(p[0], p[1], p[2])).into_inner();
    RigidTransform::new(
        rot,
        Vector3::new(p[3], p[4], p[5]),
        init.from_frame(),
        init.to_frame(),
    )
    .map_err(CalibError::Geometry)
}
