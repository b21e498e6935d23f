//! Pinhole projection, lens distortion and rigid transforms.
//!
//! All 3D points carry a [`FrameId`] naming the camera coordinate frame they
//! live in. Applying a transform to a point in the wrong frame is an error,
//! not silent corruption.

use nalgebra::{Matrix3, Vector2, Vector3};
use thiserror::Error;

/// Maximum fixed-point iterations for [`Distortion::undistort`].
pub const UNDISTORT_MAX_ITERS: usize = 20;
/// Residual below which undistortion is accepted, in normalized units.
pub const UNDISTORT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("point behind camera (z = {z})")]
    PointBehindCamera { z: f64 },
    #[error("frame mismatch: expected {expected}, got {found}")]
    FrameMismatch { expected: FrameId, found: FrameId },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation matrix is not a rotation (det = {det})")]
    InvalidRotation { det: f64 },
    #[error("undistortion did not converge (residual {residual} after {UNDISTORT_MAX_ITERS} iterations)")]
    UndistortNonConvergence { residual: f64 },
    #[error("distortion not invertible at ({x}, {y}): round-trip error {err}")]
    DistortionNotInvertible { x: f64, y: f64, err: f64 },
}

/// Identifier of a camera (or board) coordinate frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameId(u32);

impl FrameId {
    const BOARD_BASE: u32 = 0x4000_0000;

    pub const fn new(raw: u32) -> Self {
        FrameId(raw)
    }

    /// Frame of the camera at `index` within a rig.
    pub const fn camera(index: u32) -> Self {
        FrameId(index)
    }

    /// Frame attached to the calibration board in pose `view`.
    pub const fn board(view: u32) -> Self {
        FrameId(Self::BOARD_BASE + view)
    }

    pub const fn raw(self) -> u32 {
        self.0
    }
}

impl std::fmt::Display for FrameId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 >= Self::BOARD_BASE {
            write!(f, "board#{}", self.0 - Self::BOARD_BASE)
        } else {
            write!(f, "camera#{}", self.0)
        }
    }
}

/// Continuous pixel coordinate. Out-of-bounds values are legal intermediates;
/// bounds are enforced by consumers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub const fn new(u: f64, v: f64) -> Self {
        PixelCoord { u, v }
    }

    /// Center of the pixel at integer grid position (col, row).
    pub fn center(col: u32, row: u32) -> Self {
        PixelCoord::new(col as f64 + 0.5, row as f64 + 0.5)
    }

    pub fn distance(&self, other: &PixelCoord) -> f64 {
        let du = self.u - other.u;
        let dv = self.v - other.v;
        (du * du + dv * dv).sqrt()
    }
}

/// 3D point in meters, tagged with the frame it is expressed in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point3 {
    pub coords: Vector3<f64>,
    pub frame: FrameId,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64, frame: FrameId) -> Self {
        Point3 {
            coords: Vector3::new(x, y, z),
            frame,
        }
    }

    pub fn from_vector(coords: Vector3<f64>, frame: FrameId) -> Self {
        Point3 { coords, frame }
    }

    pub fn x(&self) -> f64 {
        self.coords.x
    }

    pub fn y(&self) -> f64 {
        self.coords.y
    }

    pub fn z(&self) -> f64 {
        self.coords.z
    }
}

/// Pinhole intrinsics with zero skew.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeomError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeomError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(GeomError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Project a camera-frame point to pixel coordinates.
    ///
    /// `u = fx * X/Z + cx`, `v = fy * Y/Z + cy`. The point must lie in front
    /// of the camera.
    pub fn project(&self, p: &Point3) -> Result<PixelCoord, GeomError> {
        let z = p.coords.z;
        if z <= 0.0 {
            return Err(GeomError::PointBehindCamera { z });
        }
        Ok(PixelCoord::new(
            self.fx * p.coords.x / z + self.cx,
            self.fy * p.coords.y / z + self.cy,
        ))
    }

    /// Direction of the viewing ray through a pixel, normalized to Z = 1.
    ///
    /// The full epipolar line of the pixel is `{ s * direction : s > 0 }`.
    pub fn backproject(&self, px: &PixelCoord, frame: FrameId) -> Point3 {
        Point3::new(
            (px.u - self.cx) / self.fx,
            (px.v - self.cy) / self.fy,
            1.0,
            frame,
        )
    }

    /// Pixel coordinates of a normalized image point (x/z, y/z).
    pub fn apply(&self, xn: &Vector2<f64>) -> PixelCoord {
        PixelCoord::new(self.fx * xn.x + self.cx, self.fy * xn.y + self.cy)
    }

    /// Normalized image coordinates of a pixel.
    pub fn invert(&self, px: &PixelCoord) -> Vector2<f64> {
        Vector2::new((px.u - self.cx) / self.fx, (px.v - self.cy) / self.fy)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Brown-Conrady lens distortion: radial k1, k2, k3 and tangential p1, p2.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Distortion {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub p1: f64,
    pub p2: f64,
}

impl Distortion {
    pub fn new(k1: f64, k2: f64, k3: f64, p1: f64, p2: f64) -> Self {
        Distortion { k1, k2, k3, p1, p2 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0 && self.k3 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0
    }

    /// Forward model on normalized coordinates.
    pub fn distort(&self, xn: &Vector2<f64>) -> Vector2<f64> {
        let (x, y) = (xn.x, xn.y);
        let r2 = x * x + y * y;
        let r4 = r2 * r2;
        let r6 = r4 * r2;
        let radial = 1.0 + self.k1 * r2 + self.k2 * r4 + self.k3 * r6;
        let x_tan = 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
        let y_tan = self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
        Vector2::new(x * radial + x_tan, y * radial + y_tan)
    }

    /// Fixed-point iteration for the inverse, without a convergence check.
    fn undistort_iterate(&self, xd: &Vector2<f64>) -> (Vector2<f64>, f64) {
        let mut x = *xd;
        let mut residual = f64::INFINITY;
        for _ in 0..UNDISTORT_MAX_ITERS {
            let (xc, yc) = (x.x, x.y);
            let r2 = xc * xc + yc * yc;
            let r4 = r2 * r2;
            let radial = 1.0 + self.k1 * r2 + self.k2 * r4 + self.k3 * r4 * r2;
            let x_tan = 2.0 * self.p1 * xc * yc + self.p2 * (r2 + 2.0 * xc * xc);
            let y_tan = self.p1 * (r2 + 2.0 * yc * yc) + 2.0 * self.p2 * xc * yc;
            x = Vector2::new((xd.x - x_tan) / radial, (xd.y - y_tan) / radial);
            let fwd = self.distort(&x);
            residual = (fwd.x - xd.x).abs().max((fwd.y - xd.y).abs());
            if residual < 1e-12 {
                break;
            }
        }
        (x, residual)
    }

    /// Invert the forward model by fixed-point iteration.
    ///
    /// Converges for coefficient magnitudes where the forward model is a
    /// contraction on the unit disk; see [`Distortion::check_invertible`].
    pub fn undistort(&self, xd: &Vector2<f64>) -> Result<Vector2<f64>, GeomError> {
        if self.is_zero() {
            return Ok(*xd);
        }
        let (x, residual) = self.undistort_iterate(xd);
        if !(residual <= UNDISTORT_TOL) {
            return Err(GeomError::UndistortNonConvergence { residual });
        }
        Ok(x)
    }

    /// Verify the forward model round-trips on the normalized disk |x| <= 1
    /// to within 1e-6. Run when loading calibrated parameters.
    pub fn check_invertible(&self) -> Result<(), GeomError> {
        const STEPS: i32 = 10;
        for iy in -STEPS..=STEPS {
            for ix in -STEPS..=STEPS {
                let x = ix as f64 / STEPS as f64;
                let y = iy as f64 / STEPS as f64;
                if x * x + y * y > 1.0 + 1e-12 {
                    continue;
                }
                let xn = Vector2::new(x, y);
                let (back, _) = self.undistort_iterate(&self.distort(&xn));
                let err = (back - xn).norm();
                if !(err <= 1e-6) {
                    return Err(GeomError::DistortionNotInvertible { x, y, err });
                }
            }
        }
        Ok(())
    }
}

/// Rigid transform mapping points from frame `from` to frame `to`:
/// `x_to = R * x_from + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    from: FrameId,
    to: FrameId,
}

impl RigidTransform {
    /// Validate the rotation and build the transform. Rotations with
    /// orthonormality drift above 1e-9 are re-projected onto SO(3) by polar
    /// decomposition; reflections and non-finite input are rejected.
    pub fn new(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        from: FrameId,
        to: FrameId,
    ) -> Result<Self, GeomError> {
        if rotation.iter().any(|x| !x.is_finite()) || translation.iter().any(|x| !x.is_finite()) {
            return Err(GeomError::InvalidRotation { det: f64::NAN });
        }
        let det = rotation.determinant();
        if det <= 0.0 {
            return Err(GeomError::InvalidRotation { det });
        }
        let drift = (rotation.transpose() * rotation - Matrix3::identity())
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let rotation = if drift > 1e-9 {
            nearest_rotation(&rotation)
        } else {
            rotation
        };
        Ok(RigidTransform {
            rotation,
            translation,
            from,
            to,
        })
    }

    pub fn identity(frame: FrameId) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            from: frame,
            to: frame,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn from_frame(&self) -> FrameId {
        self.from
    }

    pub fn to_frame(&self) -> FrameId {
        self.to
    }

    /// Apply to a point; its frame must match the source frame.
    pub fn apply(&self, p: &Point3) -> Result<Point3, GeomError> {
        if p.frame != self.from {
            return Err(GeomError::FrameMismatch {
                expected: self.from,
                found: p.frame,
            });
        }
        Ok(Point3::from_vector(
            self.rotation * p.coords + self.translation,
            self.to,
        ))
    }

    /// Rotate a direction vector (no translation, no frame bookkeeping).
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn invert(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
            from: self.to,
            to: self.from,
        }
    }

    /// `self ∘ inner`: first `inner`, then `self`. Frames must chain.
    pub fn compose(&self, inner: &RigidTransform) -> Result<RigidTransform, GeomError> {
        if inner.to != self.from {
            return Err(GeomError::FrameMismatch {
                expected: self.from,
                found: inner.to,
            });
        }
        Ok(RigidTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
            from: inner.from,
            to: self.to,
        })
    }

    /// Position of the destination-frame origin expressed in the source frame.
    pub fn origin_in_from(&self) -> Point3 {
        Point3::from_vector(-(self.rotation.transpose() * self.translation), self.from)
    }
}

/// Nearest rotation matrix in the Frobenius sense (polar decomposition via
/// SVD, with the sign of the last column fixed so det = +1).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let d = (u * v_t).determinant();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum()));
    u * fix * v_t
}
