//! Analytic scene primitives with view-independent procedural textures.
//!
//! Primitives are intersected analytically, never meshed, so they provide
//! ground truth that is independent of the meshing and ray-casting code
//! under test.

use nalgebra::{Matrix3, Vector2, Vector3};

/// Orientation and position of a planar primitive: local coordinates map to
/// scene coordinates as `R * x_local + t`. The primitive lies in its local
/// z = 0 plane.
#[derive(Clone, Copy, Debug)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn at(translation: Vector3<f64>) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    fn to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    fn rotate_to_local(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * v
    }
}

/// Scene surface element, in the depth-camera (scene) frame.
#[derive(Clone, Copy, Debug)]
pub enum Primitive {
    /// Horizontal square patch at height `z` (normal along the z axis).
    Plane {
        center_x: f64,
        center_y: f64,
        z: f64,
        half_extent: f64,
    },
    /// Oriented rectangular patch ("leaf"): local |x| <= half_u, |y| <= half_v.
    Rectangle {
        pose: Pose,
        half_u: f64,
        half_v: f64,
    },
    /// Oriented disk: local x^2 + y^2 <= radius^2.
    Disk { pose: Pose, radius: f64 },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
}

impl Primitive {
    /// First intersection along `origin + t * dir` with `t > t_min`, returning
    /// (t, surface coordinates for texturing).
    pub fn intersect(
        &self,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
        t_min: f64,
    ) -> Option<(f64, Vector2<f64>)> {
        match self {
            Primitive::Plane {
                center_x,
                center_y,
                z,
                half_extent,
            } => {
                if dir.z.abs() < 1e-15 {
                    return None;
                }
                let t = (z - origin.z) / dir.z;
                if t <= t_min {
                    return None;
                }
                let u = origin.x + t * dir.x - center_x;
                let v = origin.y + t * dir.y - center_y;
                (u.abs() <= *half_extent && v.abs() <= *half_extent)
                    .then_some((t, Vector2::new(u, v)))
            }
            Primitive::Rectangle { pose, half_u, half_v } => {
                let o = pose.to_local(origin);
                let d = pose.rotate_to_local(dir);
                if d.z.abs() < 1e-15 {
                    return None;
                }
                let t = -o.z / d.z;
                if t <= t_min {
                    return None;
                }
                let u = o.x + t * d.x;
                let v = o.y + t * d.y;
                (u.abs() <= *half_u && v.abs() <= *half_v).then_some((t, Vector2::new(u, v)))
            }
            Primitive::Disk { pose, radius } => {
                let o = pose.to_local(origin);
                let d = pose.rotate_to_local(dir);
                if d.z.abs() < 1e-15 {
                    return None;
                }
                let t = -o.z / d.z;
                if t <= t_min {
                    return None;
                }
                let u = o.x + t * d.x;
                let v = o.y + t * d.y;
                (u * u + v * v <= radius * radius).then_some((t, Vector2::new(u, v)))
            }
            Primitive::Sphere { center, radius } => {
                let oc = origin - center;
                let b = oc.dot(dir);
                let c = oc.dot(&oc) - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = if -b - sq > t_min {
                    -b - sq
                } else if -b + sq > t_min {
                    -b + sq
                } else {
                    return None;
                };
                let p = (origin + dir * t - center) / *radius;
                // Longitude/latitude scaled by radius: view-independent.
                let u = p.y.atan2(p.x) * radius;
                let v = p.z.clamp(-1.0, 1.0).asin() * radius;
                Some((t, Vector2::new(u, v)))
            }
        }
    }

    /// Conservative bounding box, for ROI containment checks.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            Primitive::Plane {
                center_x,
                center_y,
                z,
                half_extent,
            } => (
                Vector3::new(center_x - half_extent, center_y - half_extent, *z),
                Vector3::new(center_x + half_extent, center_y + half_extent, *z),
            ),
            Primitive::Rectangle { pose, half_u, half_v } => {
                let mut lo = Vector3::repeat(f64::INFINITY);
                let mut hi = Vector3::repeat(f64::NEG_INFINITY);
                for su in [-1.0, 1.0] {
                    for sv in [-1.0, 1.0] {
                        let corner = pose.rotation * Vector3::new(su * half_u, sv * half_v, 0.0)
                            + pose.translation;
                        lo = lo.inf(&corner);
                        hi = hi.sup(&corner);
                    }
                }
                (lo, hi)
            }
            Primitive::Disk { pose, radius } => {
                let r = Vector3::repeat(*radius);
                (pose.translation - r, pose.translation + r)
            }
            Primitive::Sphere { center, radius } => {
                let r = Vector3::repeat(*radius);
                (center - r, center + r)
            }
        }
    }
}

/// View-independent texture over a primitive's surface coordinates.
#[derive(Clone, Copy, Debug)]
pub enum Texture {
    Constant { value: f64 },
    /// Alternating squares of side `pitch`.
    Checker {
        pitch: f64,
        value0: f64,
        value1: f64,
    },
    /// offset + slope_u * u + slope_v * v.
    Gradient {
        offset: f64,
        slope_u: f64,
        slope_v: f64,
    },
}

impl Texture {
    pub fn value(&self, uv: &Vector2<f64>) -> f64 {
        match self {
            Texture::Constant { value } => *value,
            Texture::Checker {
                pitch,
                value0,
                value1,
            } => {
                let parity = ((uv.x / pitch).floor() + (uv.y / pitch).floor()) as i64 & 1;
                if parity == 0 {
                    *value0
                } else {
                    *value1
                }
            }
            Texture::Gradient {
                offset,
                slope_u,
                slope_v,
            } => offset + slope_u * uv.x + slope_v * uv.y,
        }
    }
}

/// Analytic scene: textured primitives plus the ground-plane height used for
/// the occlusion volume.
#[derive(Clone, Debug)]
pub struct Scene {
    pub primitives: Vec<(Primitive, Texture)>,
    pub ground_z: f64,
}

/// First intersection within a scene.
#[derive(Clone, Copy, Debug)]
pub struct SceneHit {
    pub t: f64,
    pub primitive: usize,
    pub uv: Vector2<f64>,
}

impl Scene {
    pub fn first_hit(
        &self,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
        t_min: f64,
    ) -> Option<SceneHit> {
        let mut best: Option<SceneHit> = None;
        for (i, (prim, _)) in self.primitives.iter().enumerate() {
            if let Some((t, uv)) = prim.intersect(origin, dir, t_min) {
                if best.map_or(true, |b| t < b.t) {
                    best = Some(SceneHit {
                        t,
                        primitive: i,
                        uv,
                    });
                }
            }
        }
        best
    }

    /// True when the open segment from `a` to `b` crosses any primitive.
    pub fn segment_blocked(&self, a: &Vector3<f64>, b: &Vector3<f64>, epsilon: f64) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= 2.0 * epsilon {
            return false;
        }
        let dir = d / len;
        match self.first_hit(a, &dir, epsilon) {
            Some(hit) => hit.t < len - epsilon,
            None => false,
        }
    }

    /// True when `q` lies in the space hidden from `eye` (above the ground
    /// plane, with a primitive blocking the line of sight from `eye`).
    pub fn in_shadow_volume(&self, eye: &Vector3<f64>, q: &Vector3<f64>, epsilon: f64) -> bool {
        q.z < self.ground_z && self.segment_blocked(eye, q, epsilon)
    }

    pub fn texture_at(&self, hit: &SceneHit) -> f64 {
        self.primitives[hit.primitive].1.value(&hit.uv)
    }
}
