//! Preset virtual rigs for tests, examples and the synthetic pipeline.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{Distortion, Intrinsics};
use crate::mesh::Roi;
use crate::rig::{CameraRig, RigBuilder};

/// Rotation part of a transform from the reference frame into a camera frame
/// placed at `position` and aimed at `target` (camera +Z forward, +X right,
/// +Y down), plus the matching translation.
pub fn look_at(
    position: Vector3<f64>,
    target: Vector3<f64>,
) -> (Matrix3<f64>, Vector3<f64>) {
    let forward = (target - position).normalize();
    let up_hint = Vector3::new(0.0, 1.0, 0.0);
    let right = up_hint.cross(&forward).normalize();
    let down = forward.cross(&right);
    let rotation = Matrix3::from_rows(&[
        right.transpose(),
        down.transpose(),
        forward.transpose(),
    ]);
    let translation = -(rotation * position);
    (rotation, translation)
}

/// Desk-scale rig: a downward-looking depth camera half a meter above the
/// working volume, a narrow-baseline satellite at 10 cm and a wide-baseline
/// satellite at 40 cm, both aimed at the volume center. `divisor` scales all
/// image resolutions down for faster tests.
pub fn desk_rig(divisor: u32) -> CameraRig {
    let d = divisor.max(1);
    let aim = Vector3::new(0.0, 0.0, 0.75);

    let ir_w = 640 / d;
    let ir_h = 576 / d;
    let ir = Intrinsics::new(
        525.0 / d as f64,
        525.0 / d as f64,
        ir_w as f64 * 0.5 - 0.3,
        ir_h as f64 * 0.5 + 0.2,
        ir_w,
        ir_h,
    )
    .unwrap();

    let nb_w = 512 / d;
    let nb_h = 384 / d;
    let narrow = Intrinsics::new(
        430.0 / d as f64,
        432.0 / d as f64,
        nb_w as f64 * 0.5 + 0.4,
        nb_h as f64 * 0.5 - 0.25,
        nb_w,
        nb_h,
    )
    .unwrap();
    let (nr, nt) = look_at(Vector3::new(0.10, 0.01, 0.0), aim);

    let wb_w = 448 / d;
    let wb_h = 448 / d;
    let wide = Intrinsics::new(
        520.0 / d as f64,
        518.0 / d as f64,
        wb_w as f64 * 0.5 - 0.1,
        wb_h as f64 * 0.5 + 0.35,
        wb_w,
        wb_h,
    )
    .unwrap();
    let (wr, wt) = look_at(Vector3::new(0.40, 0.05, 0.02), aim);

    RigBuilder::new(
        "ir",
        Roi::new([-0.6, 0.6], [-0.6, 0.6], [0.25, 1.2]).unwrap(),
    )
    .ground_z(1.2)
    .camera(
        "ir",
        "infrared",
        ir,
        Distortion::zero(),
        Matrix3::identity(),
        Vector3::zeros(),
    )
    .camera(
        "narrow",
        "rgb",
        narrow,
        Distortion::new(-0.08, 0.012, 0.0, 0.0004, -0.0006),
        nr,
        nt,
    )
    .camera(
        "wide",
        "thermal",
        wide,
        Distortion::new(-0.12, 0.02, 0.0, -0.0005, 0.0003),
        wr,
        wt,
    )
    .build()
    .unwrap()
}

/// Same layout as [`desk_rig`] but with all lens distortion zeroed; used by
/// the suites whose tolerances assume straight epipolar lines.
pub fn desk_rig_zero_distortion(divisor: u32) -> CameraRig {
    let base = desk_rig(divisor);
    let mut builder = RigBuilder::new("ir", base.roi).ground_z(base.ground_z);
    for cam in base.cameras() {
        builder = builder.camera(
            &cam.id,
            &cam.modality,
            cam.model.intrinsics,
            Distortion::zero(),
            *cam.model.from_depth.rotation(),
            *cam.model.from_depth.translation(),
        );
    }
    builder.build().unwrap()
}
