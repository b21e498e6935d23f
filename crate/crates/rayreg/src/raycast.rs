//! BVH-accelerated first-hit and any-hit ray/triangle queries.
//!
//! Triangle intersection uses Moller-Trumbore with a fixed determinant
//! epsilon; hits are ordered lexicographically by (t, triangle id) so results
//! are reproducible and independent of traversal order.

use nalgebra::Vector3;

use crate::geometry::{FrameId, Point3};
use crate::mesh::TriangleMesh;

/// Determinant magnitude below which a ray is treated as parallel to the
/// triangle plane.
pub const DET_EPSILON: f64 = 1e-12;
/// Barycentric slack: hits on edges and vertices are accepted.
pub const BARY_EPSILON: f64 = 1e-9;
/// Offset in meters used to suppress self-intersections in occlusion tests.
pub const OCCLUSION_EPSILON: f64 = 1e-4;

const MAX_LEAF_SIZE: usize = 4;
const SAH_BINS: usize = 16;

/// A ray with a unit direction and a parametric query interval in meters.
#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Point3,
    pub direction: Vector3<f64>,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    /// Normalizes the direction. Panics on zero direction or an empty
    /// interval; those are programming errors, not data conditions.
    pub fn new(origin: Point3, direction: Vector3<f64>, t_min: f64, t_max: f64) -> Self {
        let norm = direction.norm();
        assert!(norm > 0.0, "ray direction must be nonzero");
        assert!(
            t_min >= 0.0 && t_min < t_max,
            "ray interval [{t_min}, {t_max}] invalid"
        );
        Ray {
            origin,
            direction: direction / norm,
            t_min,
            t_max,
        }
    }

    /// Ray from `origin` toward `target` with an unbounded far limit.
    pub fn toward(origin: &Point3, target: &Point3) -> Self {
        debug_assert_eq!(origin.frame, target.frame);
        Ray::new(
            *origin,
            target.coords - origin.coords,
            0.0,
            f64::INFINITY,
        )
    }

    pub fn at(&self, t: f64) -> Point3 {
        Point3::from_vector(self.origin.coords + self.direction * t, self.origin.frame)
    }
}

/// First intersection of a ray with a mesh.
#[derive(Clone, Copy, Debug)]
pub struct Hit {
    pub t: f64,
    pub triangle: u32,
    pub barycentric: [f64; 3],
    pub point: Point3,
}

/// Counters filled by the instrumented query entry points.
#[derive(Clone, Copy, Debug, Default)]
pub struct TraversalStats {
    pub nodes_visited: usize,
    pub triangles_tested: usize,
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: Vector3<f64>,
    max: Vector3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow_point(&mut self, p: &Vector3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn grow(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    fn surface_area(&self) -> f64 {
        let d = self.max - self.min;
        if d.x < 0.0 || d.y < 0.0 || d.z < 0.0 {
            return 0.0;
        }
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    fn contains(&self, other: &Aabb) -> bool {
        self.min.x <= other.min.x
            && self.min.y <= other.min.y
            && self.min.z <= other.min.z
            && self.max.x >= other.max.x
            && self.max.y >= other.max.y
            && self.max.z >= other.max.z
    }

    /// Slab test returning the entry distance, or None when the interval
    /// misses the box. f64::min/max absorb the NaNs produced by 0 * inf.
    /// The comparison is padded so rays grazing a box corner exactly (for
    /// example through a shared mesh vertex) stay conservative; the triangle
    /// test decides.
    #[inline]
    fn hit(&self, origin: &Vector3<f64>, inv_dir: &Vector3<f64>, t_min: f64, t_max: f64) -> Option<f64> {
        let mut lo = t_min;
        let mut hi = t_max;
        for axis in 0..3 {
            let t0 = (self.min[axis] - origin[axis]) * inv_dir[axis];
            let t1 = (self.max[axis] - origin[axis]) * inv_dir[axis];
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
        (lo <= hi + (hi.abs() * 1e-9).max(1e-12)).then_some(lo)
    }
}

/// Triangle with precomputed edges, in BVH leaf order.
#[derive(Clone, Copy, Debug)]
struct PackedTriangle {
    base: Vector3<f64>,
    edge1: Vector3<f64>,
    edge2: Vector3<f64>,
    id: u32,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    aabb: Aabb,
    /// Leaf: index of the first triangle. Inner: index of the left child
    /// (right child is `first + 1` in `nodes`... see build).
    first: u32,
    /// Leaf: triangle count (> 0). Inner: 0.
    count: u32,
    /// Inner nodes only: index of the right child. Left child is `first`.
    right: u32,
}

/// Bounding volume hierarchy over a triangle mesh. Immutable after build;
/// queries are lock-free and safe from any number of threads.
#[derive(Clone, Debug)]
pub struct Bvh {
    pub frame: FrameId,
    nodes: Vec<Node>,
    triangles: Vec<PackedTriangle>,
    triangle_count: usize,
}

struct BuildRef {
    aabb: Aabb,
    centroid: Vector3<f64>,
    id: u32,
}

impl Bvh {
    /// Binned surface-area-heuristic build; deterministic for identical
    /// input. Handles empty meshes.
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let mut refs: Vec<BuildRef> = mesh
            .triangles
            .iter()
            .enumerate()
            .map(|(id, tri)| {
                let a = mesh.vertices[tri[0] as usize];
                let b = mesh.vertices[tri[1] as usize];
                let c = mesh.vertices[tri[2] as usize];
                let mut aabb = Aabb::empty();
                aabb.grow_point(&a);
                aabb.grow_point(&b);
                aabb.grow_point(&c);
                BuildRef {
                    aabb,
                    centroid: (a + b + c) / 3.0,
                    id: id as u32,
                }
            })
            .collect();

        let mut bvh = Bvh {
            frame: mesh.frame,
            nodes: Vec::new(),
            triangles: Vec::with_capacity(refs.len()),
            triangle_count: refs.len(),
        };
        if refs.is_empty() {
            return bvh;
        }
        let n = refs.len();
        bvh.build_node(&mut refs, 0, n, mesh);
        bvh
    }

    fn build_node(&mut self, refs: &mut [BuildRef], start: usize, end: usize, mesh: &TriangleMesh) -> u32 {
        let mut aabb = Aabb::empty();
        let mut centroid_box = Aabb::empty();
        for r in &refs[start..end] {
            aabb.grow(&r.aabb);
            centroid_box.grow_point(&r.centroid);
        }
        let count = end - start;
        let node_index = self.nodes.len() as u32;
        self.nodes.push(Node {
            aabb,
            first: 0,
            count: 0,
            right: 0,
        });

        let split = if count <= MAX_LEAF_SIZE {
            None
        } else {
            find_sah_split(&refs[start..end], &centroid_box)
        };

        match split {
            None if count <= MAX_LEAF_SIZE => {
                let first = self.triangles.len() as u32;
                // Leaf order follows input order for deterministic ties.
                let mut ids: Vec<u32> = refs[start..end].iter().map(|r| r.id).collect();
                ids.sort_unstable();
                for id in ids {
                    let tri = mesh.triangles[id as usize];
                    let a = mesh.vertices[tri[0] as usize];
                    let b = mesh.vertices[tri[1] as usize];
                    let c = mesh.vertices[tri[2] as usize];
                    self.triangles.push(PackedTriangle {
                        base: a,
                        edge1: b - a,
                        edge2: c - a,
                        id,
                    });
                }
                self.nodes[node_index as usize].first = first;
                self.nodes[node_index as usize].count = count as u32;
            }
            None => {
                // SAH failed (e.g. coincident centroids): split by id order.
                refs[start..end].sort_unstable_by_key(|r| r.id);
                let mid = start + count / 2;
                let left = self.build_node(refs, start, mid, mesh);
                let right = self.build_node(refs, mid, end, mesh);
                self.nodes[node_index as usize].first = left;
                self.nodes[node_index as usize].right = right;
            }
            Some((axis, threshold)) => {
                // Deterministic partition, stable by construction id.
                refs[start..end].sort_unstable_by(|a, b| {
                    a.centroid[axis]
                        .partial_cmp(&b.centroid[axis])
                        .unwrap()
                        .then(a.id.cmp(&b.id))
                });
                let mut mid = start;
                while mid < end && refs[mid].centroid[axis] < threshold {
                    mid += 1;
                }
                if mid == start || mid == end {
                    mid = start + count / 2;
                }
                let left = self.build_node(refs, start, mid, mesh);
                let right = self.build_node(refs, mid, end, mesh);
                self.nodes[node_index as usize].first = left;
                self.nodes[node_index as usize].right = right;
            }
        }
        node_index
    }

    pub fn triangle_count(&self) -> usize {
        self.triangle_count
    }

    /// Closest hit in the ray interval, ties on t broken by lower triangle id.
    pub fn intersect_first(&self, ray: &Ray) -> Option<Hit> {
        let mut stats = TraversalStats::default();
        self.intersect_first_stats(ray, &mut stats)
    }

    /// As [`Bvh::intersect_first`], counting visited nodes and tested
    /// triangles.
    pub fn intersect_first_stats(&self, ray: &Ray, stats: &mut TraversalStats) -> Option<Hit> {
        debug_assert_eq!(ray.origin.frame, self.frame, "ray frame does not match mesh frame");
        if self.nodes.is_empty() {
            return None;
        }
        let origin = ray.origin.coords;
        let inv_dir = Vector3::new(
            1.0 / ray.direction.x,
            1.0 / ray.direction.y,
            1.0 / ray.direction.z,
        );

        let mut best: Option<(f64, u32, f64, f64)> = None; // (t, id, u, v)
        let mut stack = [0u32; 64];
        let mut top = 0usize;
        stack[top] = 0;
        top += 1;

        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            stats.nodes_visited += 1;
            let t_cut = best.map_or(ray.t_max, |(t, _, _, _)| t);
            if node.aabb.hit(&origin, &inv_dir, ray.t_min, t_cut).is_none() {
                continue;
            }
            if node.count > 0 {
                for tri in &self.triangles[node.first as usize..(node.first + node.count) as usize] {
                    stats.triangles_tested += 1;
                    if let Some((t, u, v)) = intersect_triangle(
                        &tri.base, &tri.edge1, &tri.edge2, &origin, &ray.direction,
                    ) {
                        if t < ray.t_min || t > ray.t_max {
                            continue;
                        }
                        let better = match best {
                            None => true,
                            Some((bt, bid, _, _)) => t < bt || (t == bt && tri.id < bid),
                        };
                        if better {
                            best = Some((t, tri.id, u, v));
                        }
                    }
                }
            } else {
                // Near child first so the t cutoff prunes the far one.
                let l = node.first as usize;
                let r = node.right as usize;
                let dl = self.nodes[l].aabb.hit(&origin, &inv_dir, ray.t_min, t_cut);
                let dr = self.nodes[r].aabb.hit(&origin, &inv_dir, ray.t_min, t_cut);
                match (dl, dr) {
                    (Some(a), Some(b)) => {
                        let (near, far) = if a <= b { (l, r) } else { (r, l) };
                        stack[top] = far as u32;
                        top += 1;
                        stack[top] = near as u32;
                        top += 1;
                    }
                    (Some(_), None) => {
                        stack[top] = l as u32;
                        top += 1;
                    }
                    (None, Some(_)) => {
                        stack[top] = r as u32;
                        top += 1;
                    }
                    (None, None) => {}
                }
            }
        }

        best.map(|(t, id, u, v)| Hit {
            t,
            triangle: id,
            barycentric: [1.0 - u - v, u, v],
            point: ray.at(t),
        })
    }

    /// Any-hit query: true iff some intersection exists with
    /// `t in [t_min + epsilon, t_limit - epsilon]`. Early exit.
    pub fn intersect_before(&self, ray: &Ray, t_limit: f64, epsilon: f64) -> bool {
        debug_assert_eq!(ray.origin.frame, self.frame, "ray frame does not match mesh frame");
        if self.nodes.is_empty() {
            return false;
        }
        let lo = ray.t_min + epsilon;
        let hi = t_limit - epsilon;
        if lo >= hi {
            return false;
        }
        let origin = ray.origin.coords;
        let inv_dir = Vector3::new(
            1.0 / ray.direction.x,
            1.0 / ray.direction.y,
            1.0 / ray.direction.z,
        );
        let mut stack = [0u32; 64];
        let mut top = 0usize;
        stack[top] = 0;
        top += 1;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if node.aabb.hit(&origin, &inv_dir, lo, hi).is_none() {
                continue;
            }
            if node.count > 0 {
                for tri in &self.triangles[node.first as usize..(node.first + node.count) as usize] {
                    if let Some((t, _, _)) = intersect_triangle(
                        &tri.base, &tri.edge1, &tri.edge2, &origin, &ray.direction,
                    ) {
                        if t >= lo && t <= hi {
                            return true;
                        }
                    }
                }
            } else {
                stack[top] = node.first;
                top += 1;
                stack[top] = node.right;
                top += 1;
            }
        }
        false
    }

    /// Structural invariants: every triangle referenced exactly once, child
    /// boxes contained in their parent box. Used by tests.
    pub fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return if self.triangle_count == 0 {
                Ok(())
            } else {
                Err("no nodes but triangles present".into())
            };
        }
        let mut seen = vec![false; self.triangle_count];
        for node in &self.nodes {
            if node.count > 0 {
                for tri in &self.triangles[node.first as usize..(node.first + node.count) as usize] {
                    if seen[tri.id as usize] {
                        return Err(format!("triangle {} referenced twice", tri.id));
                    }
                    seen[tri.id as usize] = true;
                }
            } else {
                for child in [node.first, node.right] {
                    if !node.aabb.contains(&self.nodes[child as usize].aabb) {
                        return Err(format!("child {child} box escapes parent"));
                    }
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(format!("triangle {missing} not referenced"));
        }
        Ok(())
    }
}

fn find_sah_split(refs: &[BuildRef], centroid_box: &Aabb) -> Option<(usize, f64)> {
    let extent = centroid_box.max - centroid_box.min;
    let mut best: Option<(f64, usize, f64)> = None; // (cost, axis, threshold)

    for axis in 0..3 {
        if extent[axis] <= 0.0 {
            continue;
        }
        let lo = centroid_box.min[axis];
        let scale = SAH_BINS as f64 / extent[axis];

        let mut bin_boxes = [Aabb::empty(); SAH_BINS];
        let mut bin_counts = [0usize; SAH_BINS];
        for r in refs {
            let b = (((r.centroid[axis] - lo) * scale) as usize).min(SAH_BINS - 1);
            bin_boxes[b].grow(&r.aabb);
            bin_counts[b] += 1;
        }

        // Suffix sweep, then prefix sweep evaluating each split plane.
        let mut right_area = [0.0f64; SAH_BINS];
        let mut right_count = [0usize; SAH_BINS];
        let mut acc = Aabb::empty();
        let mut cnt = 0usize;
        for i in (1..SAH_BINS).rev() {
            acc.grow(&bin_boxes[i]);
            cnt += bin_counts[i];
            right_area[i] = acc.surface_area();
            right_count[i] = cnt;
        }
        let mut left = Aabb::empty();
        let mut left_count = 0usize;
        for i in 0..SAH_BINS - 1 {
            left.grow(&bin_boxes[i]);
            left_count += bin_counts[i];
            if left_count == 0 || right_count[i + 1] == 0 {
                continue;
            }
            let cost = left.surface_area() * left_count as f64
                + right_area[i + 1] * right_count[i + 1] as f64;
            let replace = match best {
                None => true,
                Some((c, _, _)) => cost < c,
            };
            if replace {
                let threshold = lo + (i + 1) as f64 / scale;
                best = Some((cost, axis, threshold));
            }
        }
    }
    best.map(|(_, axis, threshold)| (axis, threshold))
}

/// Moller-Trumbore. Returns (t, u, v) with barycentric slack BARY_EPSILON;
/// rays closer than DET_EPSILON to the triangle plane miss.
#[inline]
pub fn intersect_triangle(
    base: &Vector3<f64>,
    edge1: &Vector3<f64>,
    edge2: &Vector3<f64>,
    origin: &Vector3<f64>,
    direction: &Vector3<f64>,
) -> Option<(f64, f64, f64)> {
    let pvec = direction.cross(edge2);
    let det = edge1.dot(&pvec);
    if det.abs() < DET_EPSILON {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - base;
    let u = tvec.dot(&pvec) * inv_det;
    if u < -BARY_EPSILON || u > 1.0 + BARY_EPSILON {
        return None;
    }
    let qvec = tvec.cross(edge1);
    let v = direction.dot(&qvec) * inv_det;
    if v < -BARY_EPSILON || u + v > 1.0 + BARY_EPSILON {
        return None;
    }
    let t = edge2.dot(&qvec) * inv_det;
    if !t.is_finite() {
        return None;
    }
    Some((t, u, v))
}
