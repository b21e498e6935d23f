//! Depth-map meshing: the object mesh of the observed surface and the
//! uncertainty mesh enclosing the space hidden from the depth camera.

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{FrameId, GeomError, Intrinsics, PixelCoord, Point3};

/// Default edge filter threshold in degrees.
pub const DEFAULT_MAX_VERTICAL_ANGLE_DEG: f64 = 15.0;

/// Triangles with area at or below this are dropped as degenerate (m^2).
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("vertical angle undefined for identical vertices")]
    IdenticalVertices,
    #[error("invalid ROI: {0}")]
    InvalidRoi(String),
    #[error("depth map {what} must be finite and positive, got {value}")]
    InvalidDepth { what: &'static str, value: f64 },
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

/// Axis-aligned region of interest in the depth-camera frame, in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Roi {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Roi {
    pub fn new(x: [f64; 2], y: [f64; 2], z: [f64; 2]) -> Result<Self, MeshError> {
        for (axis, [lo, hi]) in [("x", x), ("y", y), ("z", z)] {
            if !(lo < hi) {
                return Err(MeshError::InvalidRoi(format!(
                    "{axis} range [{lo}, {hi}] must satisfy min < max"
                )));
            }
        }
        Ok(Roi {
            x_min: x[0],
            x_max: x[1],
            y_min: y[0],
            y_max: y[1],
            z_min: z[0],
            z_max: z[1],
        })
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        p.x >= self.x_min
            && p.x <= self.x_max
            && p.y >= self.y_min
            && p.y <= self.y_max
            && p.z >= self.z_min
            && p.z <= self.z_max
    }
}

/// Rectangular grid of metric depths (Z along the optical axis) owned by the
/// depth camera. Invalid pixels are stored as NaN.
#[derive(Clone, Debug)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    depths: Vec<f64>,
    pub intrinsics: Intrinsics,
}

impl DepthMap {
    /// All pixels start invalid.
    pub fn new(intrinsics: Intrinsics) -> Self {
        DepthMap {
            width: intrinsics.width,
            height: intrinsics.height,
            depths: vec![f64::NAN; (intrinsics.width * intrinsics.height) as usize],
            intrinsics,
        }
    }

    pub fn set(&mut self, col: u32, row: u32, depth: f64) -> Result<(), MeshError> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(MeshError::InvalidDepth {
                what: "value",
                value: depth,
            });
        }
        let idx = (row * self.width + col) as usize;
        self.depths[idx] = depth;
        Ok(())
    }

    pub fn clear(&mut self, col: u32, row: u32) {
        let idx = (row * self.width + col) as usize;
        self.depths[idx] = f64::NAN;
    }

    pub fn get(&self, col: u32, row: u32) -> Option<f64> {
        let d = self.depths[(row * self.width + col) as usize];
        d.is_finite().then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.depths.iter().filter(|d| d.is_finite()).count()
    }
}

/// Per-pixel 3D vertices backprojected from a depth map, prior to
/// triangulation. Grid position encodes the source pixel.
#[derive(Clone, Debug)]
pub struct VertexGrid {
    pub width: u32,
    pub height: u32,
    pub frame: FrameId,
    points: Vec<Option<Vector3<f64>>>,
}

impl VertexGrid {
    pub fn get(&self, col: u32, row: u32) -> Option<&Vector3<f64>> {
        self.points[(row * self.width + col) as usize].as_ref()
    }

    pub fn valid_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_some()).count()
    }
}

/// Indexed triangle set in a single frame. For meshes built from a depth map
/// every vertex records the source pixel it was backprojected from.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    pub frame: FrameId,
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    /// Per-vertex (col, row) provenance; None for meshes without one.
    pub vertex_source_pixel: Option<Vec<[u32; 2]>>,
}

impl TriangleMesh {
    pub fn empty(frame: FrameId) -> Self {
        TriangleMesh {
            frame,
            vertices: Vec::new(),
            triangles: Vec::new(),
            vertex_source_pixel: None,
        }
    }

    pub fn vertex(&self, index: u32) -> Point3 {
        Point3::from_vector(self.vertices[index as usize], self.frame)
    }

    pub fn triangle_area(&self, tri: &[u32; 3]) -> f64 {
        let a = self.vertices[tri[0] as usize];
        let b = self.vertices[tri[1] as usize];
        let c = self.vertices[tri[2] as usize];
        0.5 * (b - a).cross(&(c - a)).norm()
    }
}

/// An edge of the object mesh that belongs to exactly one triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: u32,
    pub b: u32,
}

/// Backproject every valid depth pixel through its pixel center and keep the
/// vertices that fall inside the ROI.
pub fn vertices_from_depth(dm: &DepthMap, roi: &Roi, frame: FrameId) -> VertexGrid {
    let mut points = Vec::with_capacity((dm.width * dm.height) as usize);
    for row in 0..dm.height {
        for col in 0..dm.width {
            let v = dm.get(col, row).and_then(|depth| {
                let dir = dm.intrinsics.backproject(&PixelCoord::center(col, row), frame);
                let p = dir.coords * depth;
                roi.contains(&p).then_some(p)
            });
            points.push(v);
        }
    }
    VertexGrid {
        width: dm.width,
        height: dm.height,
        frame,
        points,
    }
}

/// Angle between the edge v1->v2 and the XY plane of the depth-camera frame,
/// in degrees. 90 for purely vertical edges.
pub fn edge_vertical_angle_deg(v1: &Vector3<f64>, v2: &Vector3<f64>) -> Result<f64, MeshError> {
    let d = v2 - v1;
    if d == Vector3::zeros() {
        return Err(MeshError::IdenticalVertices);
    }
    let horizontal = (d.x * d.x + d.y * d.y).sqrt();
    if horizontal == 0.0 {
        return Ok(90.0);
    }
    Ok((d.z.abs() / horizontal).atan().to_degrees())
}

/// Triangulate the vertex grid. Each 2x2 cell is split along its fixed
/// top-left to bottom-right diagonal; a triangle is emitted only when all
/// three vertices are valid and none of its edges exceeds `max_angle_deg`.
pub fn build_object_mesh(grid: &VertexGrid, max_angle_deg: f64) -> TriangleMesh {
    let mut index_of = vec![u32::MAX; (grid.width * grid.height) as usize];
    let mut vertices = Vec::new();
    let mut source = Vec::new();
    let mut triangles = Vec::new();

    let vertex_index = |col: u32,
                            row: u32,
                            grid: &VertexGrid,
                            vertices: &mut Vec<Vector3<f64>>,
                            source: &mut Vec<[u32; 2]>,
                            index_of: &mut Vec<u32>|
     -> u32 {
        let flat = (row * grid.width + col) as usize;
        if index_of[flat] == u32::MAX {
            index_of[flat] = vertices.len() as u32;
            vertices.push(*grid.get(col, row).expect("valid vertex"));
            source.push([col, row]);
        }
        index_of[flat]
    };

    let edge_ok = |p: &Vector3<f64>, q: &Vector3<f64>| -> bool {
        match edge_vertical_angle_deg(p, q) {
            Ok(angle) => angle <= max_angle_deg,
            Err(_) => false,
        }
    };

    for row in 0..grid.height.saturating_sub(1) {
        for col in 0..grid.width.saturating_sub(1) {
            let tl = grid.get(col, row);
            let tr = grid.get(col + 1, row);
            let bl = grid.get(col, row + 1);
            let br = grid.get(col + 1, row + 1);

            // Lower-left triangle: TL, BL, BR.
            if let (Some(a), Some(b), Some(c)) = (tl, bl, br) {
                if edge_ok(a, b) && edge_ok(b, c) && edge_ok(c, a) {
                    let area = 0.5 * (b - a).cross(&(c - a)).norm();
                    if area > MIN_TRIANGLE_AREA {
                        let ia = vertex_index(col, row, grid, &mut vertices, &mut source, &mut index_of);
                        let ib = vertex_index(col, row + 1, grid, &mut vertices, &mut source, &mut index_of);
                        let ic = vertex_index(col + 1, row + 1, grid, &mut vertices, &mut source, &mut index_of);
                        triangles.push([ia, ib, ic]);
                    }
                }
            }
            // Upper-right triangle: TL, BR, TR.
            if let (Some(a), Some(b), Some(c)) = (tl, br, tr) {
                if edge_ok(a, b) && edge_ok(b, c) && edge_ok(c, a) {
                    let area = 0.5 * (b - a).cross(&(c - a)).norm();
                    if area > MIN_TRIANGLE_AREA {
                        let ia = vertex_index(col, row, grid, &mut vertices, &mut source, &mut index_of);
                        let ib = vertex_index(col + 1, row + 1, grid, &mut vertices, &mut source, &mut index_of);
                        let ic = vertex_index(col + 1, row, grid, &mut vertices, &mut source, &mut index_of);
                        triangles.push([ia, ib, ic]);
                    }
                }
            }
        }
    }

    TriangleMesh {
        frame: grid.frame,
        vertices,
        triangles,
        vertex_source_pixel: Some(source),
    }
}

/// Edges incident to exactly one triangle, in deterministic (a, b) order with
/// a < b, sorted.
pub fn boundary_edges(mesh: &TriangleMesh) -> Vec<BoundaryEdge> {
    use std::collections::HashMap;
    let mut incidence: HashMap<(u32, u32), u32> = HashMap::new();
    for tri in &mesh.triangles {
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let (a, b) = (tri[i].min(tri[j]), tri[i].max(tri[j]));
            *incidence.entry((a, b)).or_insert(0) += 1;
        }
    }
    let mut edges: Vec<BoundaryEdge> = incidence
        .into_iter()
        .filter(|&(_, count)| count == 1)
        .map(|((a, b), _)| BoundaryEdge { a, b })
        .collect();
    edges.sort_by_key(|e| (e.a, e.b));
    edges
}

/// Uncertainty mesh plus the number of boundary edges that could not be
/// projected onto the ground plane.
#[derive(Clone, Debug)]
pub struct UncertaintyMesh {
    pub mesh: TriangleMesh,
    pub skipped_edges: usize,
}

/// Hang an occlusion "curtain" from every boundary edge of the object mesh:
/// each boundary vertex is projected away from the camera origin onto the
/// ground plane z = `ground_z`, and each edge spawns the two triangles of the
/// quad between the edge and its projection.
///
/// Edges with a vertex at or beyond the ground plane (or not strictly in
/// front of the origin) are skipped and counted.
pub fn build_uncertainty_mesh(
    object: &TriangleMesh,
    camera_origin: &Point3,
    ground_z: f64,
) -> Result<UncertaintyMesh, MeshError> {
    if camera_origin.frame != object.frame {
        return Err(GeomError::FrameMismatch {
            expected: object.frame,
            found: camera_origin.frame,
        }
        .into());
    }
    let origin = camera_origin.coords;
    let edges = boundary_edges(object);

    let mut mesh = TriangleMesh::empty(object.frame);
    let mut index_of_top: Vec<u32> = vec![u32::MAX; object.vertices.len()];
    let mut index_of_ground: Vec<u32> = vec![u32::MAX; object.vertices.len()];
    let mut skipped = 0usize;

    let projectable = |v: &Vector3<f64>| v.z > origin.z && v.z < ground_z;

    fn intern(slot: &mut u32, vertices: &mut Vec<Vector3<f64>>, p: Vector3<f64>) -> u32 {
        if *slot == u32::MAX {
            *slot = vertices.len() as u32;
            vertices.push(p);
        }
        *slot
    }

    for edge in &edges {
        let pa = object.vertices[edge.a as usize];
        let pb = object.vertices[edge.b as usize];
        if !projectable(&pa) || !projectable(&pb) {
            skipped += 1;
            continue;
        }
        let project = |p: Vector3<f64>| {
            origin + (p - origin) * ((ground_z - origin.z) / (p.z - origin.z))
        };
        let ia = intern(&mut index_of_top[edge.a as usize], &mut mesh.vertices, pa);
        let ib = intern(&mut index_of_top[edge.b as usize], &mut mesh.vertices, pb);
        let ia_g = intern(
            &mut index_of_ground[edge.a as usize],
            &mut mesh.vertices,
            project(pa),
        );
        let ib_g = intern(
            &mut index_of_ground[edge.b as usize],
            &mut mesh.vertices,
            project(pb),
        );
        mesh.triangles.push([ia, ib, ia_g]);
        mesh.triangles.push([ib, ib_g, ia_g]);
    }

    Ok(UncertaintyMesh {
        mesh,
        skipped_edges: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const DEPTH_FRAME: FrameId = FrameId::camera(0);

    fn flat_depth(width: u32, height: u32, depth: f64) -> DepthMap {
        // Principal point on a pixel center so the center pixel backprojects
        // straight down the optical axis.
        let intr = Intrinsics::new(
            500.0,
            500.0,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
        )
        .unwrap();
        let mut dm = DepthMap::new(intr);
        for row in 0..height {
            for col in 0..width {
                dm.set(col, row, depth).unwrap();
            }
        }
        dm
    }

    fn wide_roi() -> Roi {
        Roi::new([-10.0, 10.0], [-10.0, 10.0], [0.01, 10.0]).unwrap()
    }

    #[test]
    fn backprojects_principal_pixel_to_axis() {
        let intr = Intrinsics::new(500.0, 500.0, 2.5, 1.5, 5, 3).unwrap();
        let mut dm = DepthMap::new(intr);
        dm.set(2, 1, 1.0).unwrap();
        let grid = vertices_from_depth(&dm, &wide_roi(), DEPTH_FRAME);
        let v = grid.get(2, 1).unwrap();
        assert_eq!(*v, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(grid.valid_count(), 1);
    }

    #[test]
    fn backprojects_hand_value() {
        // Pixel center (419.5, 319.5) is 100 px right of the principal
        // point: at depth 2 that is X = 100 / 500 * 2 = 0.4.
        let intr = Intrinsics::new(500.0, 500.0, 319.5, 319.5, 640, 640).unwrap();
        let mut dm = DepthMap::new(intr);
        dm.set(419, 319, 2.0).unwrap();
        let grid = vertices_from_depth(&dm, &wide_roi(), DEPTH_FRAME);
        let v = grid.get(419, 319).unwrap();
        assert_relative_eq!(v.x, 0.4, epsilon = 1e-12);
        assert_relative_eq!(v.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(v.z, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn roi_filters_everything_when_too_shallow() {
        let dm = flat_depth(4, 4, 0.5);
        let roi = Roi::new([-1.0, 1.0], [-1.0, 1.0], [0.8, 2.0]).unwrap();
        let grid = vertices_from_depth(&dm, &roi, DEPTH_FRAME);
        assert_eq!(grid.valid_count(), 0);
        let mesh = build_object_mesh(&grid, DEFAULT_MAX_VERTICAL_ANGLE_DEG);
        assert!(mesh.triangles.is_empty());
    }

    #[test]
    fn vertical_angle_values() {
        let o = Vector3::zeros();
        assert_eq!(
            edge_vertical_angle_deg(&o, &Vector3::new(1.0, 0.5, 0.0)).unwrap(),
            0.0
        );
        assert_relative_eq!(
            edge_vertical_angle_deg(&o, &Vector3::new(1.0, 0.0, 1.0)).unwrap(),
            45.0,
            epsilon = 1e-12
        );
        assert_eq!(
            edge_vertical_angle_deg(&o, &Vector3::new(0.0, 0.0, 0.01)).unwrap(),
            90.0
        );
        assert!(matches!(
            edge_vertical_angle_deg(&o, &o),
            Err(MeshError::IdenticalVertices)
        ));
    }

    #[test]
    fn flat_two_by_two_grid() {
        let dm = flat_depth(2, 2, 1.0);
        let grid = vertices_from_depth(&dm, &wide_roi(), DEPTH_FRAME);
        let mesh = build_object_mesh(&grid, DEFAULT_MAX_VERTICAL_ANGLE_DEG);
        assert_eq!(mesh.triangles.len(), 2);

        // 5 distinct edges, 4 of them on the boundary.
        let mut edges = std::collections::HashSet::new();
        for tri in &mesh.triangles {
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                edges.insert((tri[i].min(tri[j]), tri[i].max(tri[j])));
            }
        }
        assert_eq!(edges.len(), 5);
        assert_eq!(boundary_edges(&mesh).len(), 4);
    }

    #[test]
    fn flat_three_by_three_grid() {
        let dm = flat_depth(3, 3, 1.0);
        let grid = vertices_from_depth(&dm, &wide_roi(), DEPTH_FRAME);
        let mesh = build_object_mesh(&grid, DEFAULT_MAX_VERTICAL_ANGLE_DEG);
        assert_eq!(mesh.triangles.len(), 8);
        // Boundary count cross-checked against the incidence oracle below.
        let oracle = brute_force_boundary(&mesh);
        let found = boundary_edges(&mesh);
        assert_eq!(found.len(), oracle.len());
        assert_eq!(found, oracle);
        assert_eq!(found.len(), 8);
    }

    /// Independent incidence count: for every unordered vertex pair, count
    /// the triangles containing both endpoints as an edge.
    fn brute_force_boundary(mesh: &TriangleMesh) -> Vec<BoundaryEdge> {
        let n = mesh.vertices.len() as u32;
        let mut out = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                let mut count = 0;
                for tri in &mesh.triangles {
                    let has = |v: u32| tri.contains(&v);
                    if has(a) && has(b) {
                        // Both vertices present; is (a, b) one of its edges?
                        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                            if (tri[i] == a && tri[j] == b) || (tri[i] == b && tri[j] == a) {
                                count += 1;
                            }
                        }
                    }
                }
                if count == 1 {
                    out.push(BoundaryEdge { a, b });
                }
            }
        }
        out
    }

    #[test]
    fn single_triangle_and_tetrahedron_boundaries() {
        let mut single = TriangleMesh::empty(DEPTH_FRAME);
        single.vertices = vec![
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 0.0, 1.0),
            Vector3::new(0.0, 1.0, 1.0),
        ];
        single.triangles = vec![[0, 1, 2]];
        assert_eq!(boundary_edges(&single).len(), 3);

        let mut tetra = TriangleMesh::empty(DEPTH_FRAME);
        tetra.vertices = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ];
        tetra.triangles = vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
        assert!(boundary_edges(&tetra).is_empty());
    }

    #[test]
    fn depth_step_splits_components() {
        // Two flat 3x3 patches at different depths; the seam edges exceed 15
        // degrees, so the mesh separates into two components.
        let intr = Intrinsics::new(500.0, 500.0, 3.0, 1.5, 6, 3).unwrap();
        let mut dm = DepthMap::new(intr);
        for row in 0..3 {
            for col in 0..6 {
                let depth = if col < 3 { 1.0 } else { 1.4 };
                dm.set(col, row, depth).unwrap();
            }
        }
        let grid = vertices_from_depth(&dm, &wide_roi(), DEPTH_FRAME);
        let mesh = build_object_mesh(&grid, DEFAULT_MAX_VERTICAL_ANGLE_DEG);
        assert_eq!(connected_components(&mesh), 2);

        // No emitted edge may exceed the threshold.
        for tri in &mesh.triangles {
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let angle = edge_vertical_angle_deg(
                    &mesh.vertices[tri[i] as usize],
                    &mesh.vertices[tri[j] as usize],
                )
                .unwrap();
                assert!(angle <= DEFAULT_MAX_VERTICAL_ANGLE_DEG);
            }
        }
    }

    fn connected_components(mesh: &TriangleMesh) -> usize {
        let n = mesh.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for tri in &mesh.triangles {
            let a = find(&mut parent, tri[0] as usize);
            let b = find(&mut parent, tri[1] as usize);
            parent[b] = a;
            let c = find(&mut parent, tri[2] as usize);
            let a2 = find(&mut parent, a);
            parent[c] = a2;
        }
        let mut roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    #[test]
    fn object_mesh_vertices_reproject_to_source_pixels() {
        let dm = flat_depth(8, 6, 1.0);
        let grid = vertices_from_depth(&dm, &wide_roi(), DEPTH_FRAME);
        let mesh = build_object_mesh(&grid, DEFAULT_MAX_VERTICAL_ANGLE_DEG);
        let src = mesh.vertex_source_pixel.as_ref().unwrap();
        for (i, v) in mesh.vertices.iter().enumerate() {
            let px = dm
                .intrinsics
                .project(&Point3::from_vector(*v, DEPTH_FRAME))
                .unwrap();
            let expect = PixelCoord::center(src[i][0], src[i][1]);
            assert!(px.distance(&expect) <= 1e-6, "vertex {i} off by {}", px.distance(&expect));
        }
    }

    #[test]
    fn ground_projection_formula() {
        let mut mesh = TriangleMesh::empty(DEPTH_FRAME);
        mesh.vertices = vec![
            Vector3::new(0.1, 0.0, 0.5),
            Vector3::new(0.1, 0.05, 0.5),
            Vector3::new(0.2, 0.0, 0.5),
        ];
        mesh.triangles = vec![[0, 1, 2]];
        let origin = Point3::new(0.0, 0.0, 0.0, DEPTH_FRAME);
        let unc = build_uncertainty_mesh(&mesh, &origin, 1.0).unwrap();
        // 3 boundary edges, two triangles each.
        assert_eq!(unc.mesh.triangles.len(), 6);
        assert_eq!(unc.skipped_edges, 0);
        // Vertex (0.1, 0, 0.5) projects to (0.2, 0, 1.0).
        assert!(unc
            .mesh
            .vertices
            .iter()
            .any(|v| (v - Vector3::new(0.2, 0.0, 1.0)).norm() < 1e-12));
    }

    #[test]
    fn curtain_quad_for_horizontal_edge() {
        let mut mesh = TriangleMesh::empty(DEPTH_FRAME);
        let ground_z = 1.0;
        mesh.vertices = vec![
            Vector3::new(-0.1, 0.0, 0.5),
            Vector3::new(0.1, 0.0, 0.5),
            Vector3::new(0.0, 0.1, 0.5),
        ];
        mesh.triangles = vec![[0, 1, 2]];
        let unc = build_uncertainty_mesh(
            &mesh,
            &Point3::new(0.0, 0.0, 0.0, DEPTH_FRAME),
            ground_z,
        )
        .unwrap();
        assert_eq!(unc.mesh.triangles.len(), 2 * 3);
        // Every curtain triangle has its generating edge or the projected
        // segment as one side: triangles come in (a, b, a') / (b, b', a')
        // pairs by construction, check the index pattern.
        for pair in unc.mesh.triangles.chunks(2) {
            let [a, b, ag] = pair[0];
            let [b2, bg, ag2] = pair[1];
            assert_eq!(b, b2);
            assert_eq!(ag, ag2);
            assert!(ag != a && bg != b);
        }
    }

    #[test]
    fn vertices_beyond_ground_are_skipped() {
        let mut mesh = TriangleMesh::empty(DEPTH_FRAME);
        mesh.vertices = vec![
            Vector3::new(0.0, 0.0, 0.5),
            Vector3::new(0.1, 0.0, 1.2), // beyond ground_z = 1.0
            Vector3::new(0.0, 0.1, 0.5),
        ];
        mesh.triangles = vec![[0, 1, 2]];
        let unc = build_uncertainty_mesh(
            &mesh,
            &Point3::new(0.0, 0.0, 0.0, DEPTH_FRAME),
            1.0,
        )
        .unwrap();
        // Two of the three boundary edges touch the deep vertex.
        assert_eq!(unc.skipped_edges, 2);
        assert_eq!(unc.mesh.triangles.len(), 2);
    }

    #[test]
    fn empty_boundary_yields_empty_mesh() {
        let mesh = TriangleMesh::empty(DEPTH_FRAME);
        let unc = build_uncertainty_mesh(
            &mesh,
            &Point3::new(0.0, 0.0, 0.0, DEPTH_FRAME),
            1.0,
        )
        .unwrap();
        assert!(unc.mesh.triangles.is_empty());
        assert!(unc.mesh.vertices.is_empty());
    }
}
