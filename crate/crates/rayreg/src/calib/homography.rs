//! Normalized direct linear transform for plane-to-image homographies.

use nalgebra::{DMatrix, Matrix3, Vector2};

use super::CalibError;

/// Estimate the homography H with ||H||_F = 1 mapping `board` points to
/// `image` points, minimizing algebraic error (Hartley-normalized DLT).
pub fn estimate_homography(
    board: &[Vector2<f64>],
    image: &[Vector2<f64>],
) -> Result<Matrix3<f64>, CalibError> {
    if board.len() != image.len() {
        return Err(CalibError::Degenerate(format!(
            "point count mismatch: {} board vs {} image",
            board.len(),
            image.len()
        )));
    }
    if board.len() < 4 {
        return Err(CalibError::InsufficientPoints {
            needed: 4,
            got: board.len(),
        });
    }

    let t_board = normalization(board);
    let t_image = normalization(image);

    let n = board.len();
    // Pad to at least 9 rows so the SVD exposes the full right-singular
    // basis (the null direction) even for the minimal 4-point case.
    let mut a = DMatrix::<f64>::zeros((2 * n).max(9), 9);
    for (i, (bp, ip)) in board.iter().zip(image.iter()).enumerate() {
        let b = apply_norm(&t_board, bp);
        let p = apply_norm(&t_image, ip);
        let (x, y) = (b.x, b.y);
        let (u, v) = (p.x, p.y);
        a.row_mut(2 * i)
            .copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(2 * i + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }

    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    // The system must have rank 8: a second near-zero singular value means
    // the configuration does not determine a homography.
    let n_sv = sv.len();
    if n_sv >= 2 && sv[n_sv - 2] <= 1e-10 * sv[0] {
        return Err(CalibError::Degenerate(
            "rank-deficient homography system (collinear points?)".into(),
        ));
    }
    let v_t = svd.v_t.expect("svd v_t");
    let h = v_t.row(v_t.nrows() - 1);
    let h_norm = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);

    let t_image_inv = t_image.try_inverse().expect("normalization invertible");
    let mut hmtx = t_image_inv * h_norm * t_board;

    // Fixed scale and sign for reproducibility.
    hmtx /= hmtx.norm();
    let lead = hmtx.iter().cloned().fold(0.0f64, |acc, x| {
        if x.abs() > acc.abs() {
            x
        } else {
            acc
        }
    });
    if lead < 0.0 {
        hmtx = -hmtx;
    }
    Ok(hmtx)
}

/// Apply a homography to an inhomogeneous 2D point.
pub fn apply_homography(h: &Matrix3<f64>, p: &Vector2<f64>) -> Vector2<f64> {
    let q = h * nalgebra::Vector3::new(p.x, p.y, 1.0);
    Vector2::new(q.x / q.z, q.y / q.z)
}

/// Similarity that moves the centroid to the origin and the mean distance
/// to sqrt(2).
fn normalization(points: &[Vector2<f64>]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector2<f64>>() / n;
    let mean_dist = points.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n;
    let scale = if mean_dist > 1e-12 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(
        scale,
        0.0,
        -scale * centroid.x,
        0.0,
        scale,
        -scale * centroid.y,
        0.0,
        0.0,
        1.0,
    )
}

fn apply_norm(t: &Matrix3<f64>, p: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(
        t[(0, 0)] * p.x + t[(0, 2)],
        t[(1, 1)] * p.y + t[(1, 2)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Vector2<f64>> {
        vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(1.0, 1.0),
            Vector2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn identity_for_identical_point_sets() {
        let pts = unit_square();
        let h = estimate_homography(&pts, &pts).unwrap();
        let id = Matrix3::<f64>::identity() / Matrix3::<f64>::identity().norm();
        assert!((h - id).norm() < 1e-9, "h = {h}");
    }

    #[test]
    fn recovers_synthetic_homography() {
        let truth = Matrix3::new(0.9, 0.1, 2.0, -0.2, 1.1, -1.0, 0.001, -0.002, 1.0);
        let board: Vec<Vector2<f64>> = (0..6)
            .flat_map(|r| (0..8).map(move |c| Vector2::new(c as f64 * 0.03, r as f64 * 0.03)))
            .collect();
        let image: Vec<Vector2<f64>> = board.iter().map(|p| apply_homography(&truth, p)).collect();
        let h = estimate_homography(&board, &image).unwrap();
        let truth_unit = truth / truth.norm();
        let diff = (h - truth_unit).norm().min((h + truth_unit).norm());
        assert!(diff < 1e-9, "relative error {diff}");
    }

    #[test]
    fn too_few_points_is_error() {
        let pts = &unit_square()[..3];
        assert!(matches!(
            estimate_homography(pts, pts),
            Err(CalibError::InsufficientPoints { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let board: Vec<Vector2<f64>> = (0..8).map(|i| Vector2::new(i as f64, 0.0)).collect();
        let image = board.clone();
        assert!(matches!(
            estimate_homography(&board, &image),
            Err(CalibError::Degenerate(_))
        ));
    }
}
