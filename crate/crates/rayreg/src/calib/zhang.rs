//! Closed-form intrinsics from plane homographies via the image of the
//! absolute conic, and board poses from a homography once K is known.

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::CalibError;
use crate::geometry::{nearest_rotation, FrameId, Intrinsics, RigidTransform};

/// Constraint row on the reduced conic vector (B11, B22, B13, B23, B33),
/// with the zero-skew slot B12 eliminated.
fn conic_row(h: &Matrix3<f64>, i: usize, j: usize) -> [f64; 5] {
    let hi = h.column(i);
    let hj = h.column(j);
    [
        hi[0] * hj[0],
        hi[1] * hj[1],
        hi[2] * hj[0] + hi[0] * hj[2],
        hi[2] * hj[1] + hi[1] * hj[2],
        hi[2] * hj[2],
    ]
}

/// Closed-form fx, fy, cx, cy from at least three homographies of a planar
/// target in distinct orientations. Skew is structurally zero.
pub fn intrinsics_from_homographies(
    homographies: &[Matrix3<f64>],
    width: u32,
    height: u32,
) -> Result<Intrinsics, CalibError> {
    let m = homographies.len();
    if m < 3 {
        return Err(CalibError::InsufficientViews { needed: 3, got: m });
    }
    let mut a = DMatrix::<f64>::zeros(2 * m, 5);
    for (k, h) in homographies.iter().enumerate() {
        let v12 = conic_row(h, 0, 1);
        let v11 = conic_row(h, 0, 0);
        let v22 = conic_row(h, 1, 1);
        for c in 0..5 {
            a[(2 * k, c)] = v12[c];
            a[(2 * k + 1, c)] = v11[c] - v22[c];
        }
    }

    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let n_sv = sv.len();
    if sv[0] <= 0.0 || sv[n_sv - 2] <= 1e-9 * sv[0] {
        return Err(CalibError::IllConditioned(
            "board orientations do not constrain the intrinsics (near-parallel views?)".into(),
        ));
    }
    let v_t = svd.v_t.expect("svd v_t");
    let b = v_t.row(v_t.nrows() - 1);
    let (mut b11, mut b22, mut b13, mut b23, mut b33) = (b[0], b[1], b[2], b[3], b[4]);
    if b11 < 0.0 {
        b11 = -b11;
        b22 = -b22;
        b13 = -b13;
        b23 = -b23;
        b33 = -b33;
    }
    if b22 <= 0.0 {
        return Err(CalibError::IllConditioned(
            "conic estimate is not positive definite".into(),
        ));
    }

    let cx = -b13 / b11;
    let cy = -b23 / b22;
    let lambda = b33 - (b13 * b13 / b11 + b23 * b23 / b22);
    if lambda <= 0.0 {
        return Err(CalibError::IllConditioned(
            "negative scale in conic decomposition".into(),
        ));
    }
    let fx = (lambda / b11).sqrt();
    let fy = (lambda / b22).sqrt();

    Intrinsics::new(fx, fy, cx, cy, width, height)
        .map_err(|e| CalibError::IllConditioned(e.to_string()))
}

/// Recover the board pose (board frame to camera frame) from a homography
/// and known intrinsics. The rotation is re-orthonormalized and the sign is
/// chosen so the board lies in front of the camera.
pub fn board_pose_from_homography(
    h: &Matrix3<f64>,
    intrinsics: &Intrinsics,
    board_frame: FrameId,
    camera_frame: FrameId,
) -> Result<RigidTransform, CalibError> {
    let k_inv = intrinsics
        .matrix()
        .try_inverse()
        .expect("intrinsics invertible");
    let h1 = k_inv * h.column(0);
    let h2 = k_inv * h.column(1);
    let h3 = k_inv * h.column(2);
    let norm = h1.norm();
    if norm < 1e-15 {
        return Err(CalibError::Degenerate("homography column collapsed".into()));
    }
    let mut lambda = 1.0 / norm;
    if (lambda * h3).z < 0.0 {
        lambda = -lambda;
    }
    let r1: Vector3<f64> = lambda * h1;
    let r2: Vector3<f64> = lambda * h2;
    let r3 = r1.cross(&r2);
    let t = lambda * h3;
    let r = nearest_rotation(&Matrix3::from_columns(&[r1, r2, r3]));
    RigidTransform::new(r, t, board_frame, camera_frame).map_err(CalibError::Geometry)
}
