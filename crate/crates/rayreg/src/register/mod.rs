//! Per-pixel ray-cast correspondence between cameras: case classification,
//! registered images, masks and multimodal point clouds.

mod resample;

pub use resample::{resample, Interp};

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{GeomError, PixelCoord, Point3};
use crate::image::ImageBuf;
use crate::mesh::{
    build_object_mesh, build_uncertainty_mesh, vertices_from_depth, DepthMap, MeshError,
    TriangleMesh,
};
use crate::raycast::{Bvh, Hit, Ray, OCCLUSION_EPSILON};
use crate::rig::{CameraRig, RigError};

/// Environment variable limiting the worker thread count. Results are
/// identical for every setting.
pub const WORKER_ENV: &str = "RAYREG_THREADS";

#[derive(Debug, Error)]
pub enum RegError {
    #[error("image for camera '{camera}' is {got_w}x{got_h}x{got_c}, expected {want_w}x{want_h}")]
    ImageSizeMismatch {
        camera: String,
        got_w: u32,
        got_h: u32,
        got_c: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("depth map is {got_w}x{got_h}, depth camera '{camera}' is {want_w}x{want_h}")]
    DepthSizeMismatch {
        camera: String,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("correspondence map is for source '{expected}', got image for '{found}'")]
    SourceMismatch { expected: String, found: String },
    #[error(transparent)]
    Rig(#[from] RigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

/// Outcome classes of one target pixel, per the overview table:
/// P4/P5/P6 depend on the target camera only; P1/P2/P3.1/P3.2 additionally
/// involve one source camera.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionCase {
    /// P1: clean match, nothing in the way.
    CertainMatch,
    /// P2: the source camera sees a nearer surface; the mapping is wrong.
    Occlusion,
    /// P3.1: the incoming ray crossed hidden space before reaching the
    /// surface; the mapped value may belong to a concealed object.
    UncertainIncoming,
    /// P3.2: the outgoing ray crosses hidden space; a concealed object may
    /// block the source camera.
    UncertainOutgoing,
    /// P4: the pixel images a surface the depth camera has seen.
    CertainObject,
    /// P5: the pixel may image hidden space; nothing can be asserted.
    UncertainObject,
    /// P6: the pixel images neither surface nor hidden space.
    CertainBackground,
}

impl ProjectionCase {
    /// Code in per-source case masks (0 means unmapped).
    pub fn mask_code(self) -> u8 {
        match self {
            ProjectionCase::CertainMatch => 1,
            ProjectionCase::Occlusion => 2,
            ProjectionCase::UncertainIncoming => 3,
            ProjectionCase::UncertainOutgoing => 4,
            ProjectionCase::CertainObject => 1, // only meaningful in area masks
            ProjectionCase::UncertainObject => 5,
            ProjectionCase::CertainBackground => 6,
        }
    }

    /// Code in the target-only area mask: 1 = on-surface (P4), 5 = uncertain
    /// (P5), 6 = background (P6).
    pub fn area_code(self) -> u8 {
        match self {
            ProjectionCase::CertainObject => 1,
            ProjectionCase::UncertainObject => 5,
            ProjectionCase::CertainBackground => 6,
            other => other.mask_code(),
        }
    }
}

/// Incoming-ray data for one target pixel.
#[derive(Clone, Debug)]
pub struct TargetRaySample {
    pub object_hit: Option<Hit>,
    pub uncertainty_hit: Option<Hit>,
    /// P4, P5 or P6.
    pub area: ProjectionCase,
}

/// First-hit records for every pixel of the target camera. Computed once;
/// shared by all source pairings.
#[derive(Clone, Debug)]
pub struct TargetRayField {
    pub target_id: String,
    pub width: u32,
    pub height: u32,
    samples: Vec<TargetRaySample>,
}

impl TargetRayField {
    pub fn sample(&self, col: u32, row: u32) -> &TargetRaySample {
        &self.samples[(row * self.width + col) as usize]
    }

    pub fn samples(&self) -> &[TargetRaySample] {
        &self.samples
    }

    pub fn area_mask(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.area.area_code()).collect()
    }
}

/// One target pixel's mapping into a specific source camera.
#[derive(Clone, Copy, Debug)]
pub struct Correspondence {
    /// Continuous raw source pixel; present only when the 3D point projects
    /// inside the source image with positive depth.
    pub source_px: Option<PixelCoord>,
    /// 3D hit point in the depth-camera frame.
    pub point: Option<Vector3<f64>>,
    pub case: ProjectionCase,
}

/// Per-target-pixel correspondences into one source camera.
#[derive(Clone, Debug)]
pub struct CorrespondenceMap {
    pub target_id: String,
    pub source_id: String,
    pub width: u32,
    pub height: u32,
    pub source_width: u32,
    pub source_height: u32,
    entries: Vec<Correspondence>,
}

impl CorrespondenceMap {
    pub fn get(&self, col: u32, row: u32) -> &Correspondence {
        &self.entries[(row * self.width + col) as usize]
    }

    pub fn entries(&self) -> &[Correspondence] {
        &self.entries
    }

    /// Per-source case mask: 0 for pixels without a usable mapping slot,
    /// case codes 1..6 otherwise.
    pub fn case_mask(&self) -> Vec<u8> {
        self.entries
            .iter()
            .map(|e| {
                if matches!(
                    e.case,
                    ProjectionCase::CertainMatch
                        | ProjectionCase::Occlusion
                        | ProjectionCase::UncertainIncoming
                        | ProjectionCase::UncertainOutgoing
                ) && e.source_px.is_none()
                {
                    0
                } else {
                    e.case.mask_code()
                }
            })
            .collect()
    }
}

fn effective_threads(requested: Option<usize>) -> Option<usize> {
    requested.or_else(|| {
        std::env::var(WORKER_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
    })
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match effective_threads(threads) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// Cast one ray per target pixel into both meshes and classify the area
/// cases. Row-parallel; the result does not depend on the worker count.
pub fn cast_target_rays(
    rig: &CameraRig,
    target_id: &str,
    object: &Bvh,
    uncertainty: &Bvh,
    threads: Option<usize>,
) -> Result<TargetRayField, RegError> {
    let target = rig.camera(target_id)?;
    let width = target.model.intrinsics.width;
    let height = target.model.intrinsics.height;

    let rows: Vec<Vec<TargetRaySample>> = with_pool(threads, || {
        (0..height)
            .into_par_iter()
            .map(|row| {
                let mut out = Vec::with_capacity(width as usize);
                for col in 0..width {
                    let sample = match target.model.pixel_ray_in_depth(&PixelCoord::center(col, row))
                    {
                        Ok((origin, dir)) => {
                            let ray = Ray::new(origin, dir, 0.0, f64::INFINITY);
                            let object_hit = object.intersect_first(&ray);
                            let uncertainty_hit = uncertainty.intersect_first(&ray);
                            let area = match (&object_hit, &uncertainty_hit) {
                                // Ties go to the surface hit.
                                (Some(o), Some(u)) if o.t <= u.t => ProjectionCase::CertainObject,
                                (Some(_), None) => ProjectionCase::CertainObject,
                                (_, Some(_)) => ProjectionCase::UncertainObject,
                                (None, None) => ProjectionCase::CertainBackground,
                            };
                            TargetRaySample {
                                object_hit,
                                uncertainty_hit,
                                area,
                            }
                        }
                        // Undistortion outside its basin: no usable ray.
                        Err(_) => TargetRaySample {
                            object_hit: None,
                            uncertainty_hit: None,
                            area: ProjectionCase::CertainBackground,
                        },
                    };
                    out.push(sample);
                }
                out
            })
            .collect()
    });

    Ok(TargetRayField {
        target_id: target_id.to_string(),
        width,
        height,
        samples: rows.into_iter().flatten().collect(),
    })
}

/// Classify every target pixel against one source camera and compute its
/// continuous source coordinates.
///
/// Pixels with an object-mesh hit are mapped. A hit whose incoming ray
/// crossed the uncertainty mesh first is provisionally P3.1; casting a ray
/// from the source camera toward the hit point then settles the case with
/// precedence P2 > P3.1 > P3.2 > P1.
pub fn correspond(
    field: &TargetRayField,
    rig: &CameraRig,
    source_id: &str,
    object: &Bvh,
    uncertainty: &Bvh,
    threads: Option<usize>,
) -> Result<CorrespondenceMap, RegError> {
    let source = rig.camera(source_id)?;
    let source_center = source.model.center_in_depth();
    let width = field.width;
    let height = field.height;
    let depth_frame = rig.depth_frame();

    let rows: Vec<Vec<Correspondence>> = with_pool(threads, || {
        (0..height)
            .into_par_iter()
            .map(|row| {
                let mut out = Vec::with_capacity(width as usize);
                for col in 0..width {
                    let sample = field.sample(col, row);
                    let Some(object_hit) = &sample.object_hit else {
                        out.push(Correspondence {
                            source_px: None,
                            point: None,
                            case: sample.area,
                        });
                        continue;
                    };
                    let provisional_uncertain = sample
                        .uncertainty_hit
                        .as_ref()
                        .is_some_and(|u| u.t < object_hit.t);

                    let hit_point = object_hit.point;
                    let to_hit = hit_point.coords - source_center.coords;
                    let distance = to_hit.norm();

                    let case = if distance <= 2.0 * OCCLUSION_EPSILON {
                        // Source sits on the surface; nothing can occlude.
                        if provisional_uncertain {
                            ProjectionCase::UncertainIncoming
                        } else {
                            ProjectionCase::CertainMatch
                        }
                    } else {
                        let outgoing = Ray::new(source_center, to_hit, 0.0, f64::INFINITY);
                        if object.intersect_before(&outgoing, distance, OCCLUSION_EPSILON) {
                            ProjectionCase::Occlusion
                        } else if provisional_uncertain {
                            ProjectionCase::UncertainIncoming
                        } else if uncertainty.intersect_before(&outgoing, distance, OCCLUSION_EPSILON)
                        {
                            ProjectionCase::UncertainOutgoing
                        } else {
                            ProjectionCase::CertainMatch
                        }
                    };

                    let p = Point3::from_vector(hit_point.coords, depth_frame);
                    let source_px = source
                        .model
                        .project_from_depth(&p)
                        .ok()
                        .flatten()
                        .filter(|px| {
                            px.u >= 0.0
                                && px.u < source.model.intrinsics.width as f64
                                && px.v >= 0.0
                                && px.v < source.model.intrinsics.height as f64
                        });

                    out.push(Correspondence {
                        source_px,
                        point: Some(hit_point.coords),
                        case,
                    });
                }
                out
            })
            .collect()
    });

    Ok(CorrespondenceMap {
        target_id: field.target_id.clone(),
        source_id: source_id.to_string(),
        width,
        height,
        source_width: source.model.intrinsics.width,
        source_height: source.model.intrinsics.height,
        entries: rows.into_iter().flatten().collect(),
    })
}

/// One registered source: the correspondence map, its case mask, and the
/// resampled image when the source image was supplied.
#[derive(Clone, Debug)]
pub struct SourceRegistration {
    pub map: CorrespondenceMap,
    pub case_mask: Vec<u8>,
    pub image: Option<ImageBuf>,
}

/// Values of one modality sampled onto the point cloud.
#[derive(Clone, Debug)]
pub struct CloudChannel {
    pub camera_id: String,
    pub modality: String,
    pub channels: u32,
    /// Point-major: values[point * channels + c].
    pub values: Vec<f32>,
    /// Per-point case code (0 = unmapped).
    pub case_codes: Vec<u8>,
}

/// 3D hit points of all certain-object pixels, with one sampled value set
/// per available modality.
#[derive(Clone, Debug)]
pub struct MultimodalPointCloud {
    pub frame: crate::geometry::FrameId,
    pub points: Vec<Vector3<f64>>,
    /// Originating target pixel of each point.
    pub target_pixels: Vec<[u32; 2]>,
    pub channels: Vec<CloudChannel>,
}

/// Everything `register_all` produces.
#[derive(Clone, Debug)]
pub struct RegistrationOutput {
    pub object_mesh: TriangleMesh,
    pub uncertainty_mesh: TriangleMesh,
    pub skipped_boundary_edges: usize,
    pub field: TargetRayField,
    pub area_mask: Vec<u8>,
    pub per_source: BTreeMap<String, SourceRegistration>,
    pub cloud: MultimodalPointCloud,
}

#[derive(Clone, Copy, Debug)]
pub struct RegistrationOptions {
    pub interp: Interp,
    pub threads: Option<usize>,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        RegistrationOptions {
            interp: Interp::Bilinear,
            threads: None,
        }
    }
}

/// Full pipeline for one target view: build both meshes once, cast the
/// incoming rays once, then classify, map and resample against every other
/// camera, and assemble the multimodal point cloud.
pub fn register_all(
    rig: &CameraRig,
    target_id: &str,
    depth: &DepthMap,
    images: &BTreeMap<String, ImageBuf>,
    options: &RegistrationOptions,
) -> Result<RegistrationOutput, RegError> {
    let depth_cam = rig.depth_camera();
    if depth.width != depth_cam.model.intrinsics.width
        || depth.height != depth_cam.model.intrinsics.height
    {
        return Err(RegError::DepthSizeMismatch {
            camera: depth_cam.id.clone(),
            got_w: depth.width,
            got_h: depth.height,
            want_w: depth_cam.model.intrinsics.width,
            want_h: depth_cam.model.intrinsics.height,
        });
    }
    rig.camera(target_id)?;
    for (id, img) in images {
        let cam = rig.camera(id)?;
        if img.width != cam.model.intrinsics.width || img.height != cam.model.intrinsics.height {
            return Err(RegError::ImageSizeMismatch {
                camera: id.clone(),
                got_w: img.width,
                got_h: img.height,
                got_c: img.channels,
                want_w: cam.model.intrinsics.width,
                want_h: cam.model.intrinsics.height,
            });
        }
    }

    let grid = vertices_from_depth(depth, &rig.roi, rig.depth_frame());
    let object_mesh = build_object_mesh(&grid, rig.max_vertical_angle_deg);
    let origin = Point3::new(0.0, 0.0, 0.0, rig.depth_frame());
    let unc = build_uncertainty_mesh(&object_mesh, &origin, rig.ground_z)?;

    let object_bvh = Bvh::build(&object_mesh);
    let uncertainty_bvh = Bvh::build(&unc.mesh);

    let field = cast_target_rays(rig, target_id, &object_bvh, &uncertainty_bvh, options.threads)?;
    let area_mask = field.area_mask();

    let mut per_source = BTreeMap::new();
    for cam in rig.cameras() {
        if cam.id == target_id {
            continue;
        }
        let map = correspond(
            &field,
            rig,
            &cam.id,
            &object_bvh,
            &uncertainty_bvh,
            options.threads,
        )?;
        let case_mask = map.case_mask();
        let image = match images.get(&cam.id) {
            Some(src) => Some(resample(src, &map, options.interp)?),
            None => None,
        };
        per_source.insert(
            cam.id.clone(),
            SourceRegistration {
                map,
                case_mask,
                image,
            },
        );
    }

    let cloud = build_cloud(rig, target_id, &field, &per_source, images, options.interp);

    Ok(RegistrationOutput {
        object_mesh,
        uncertainty_mesh: unc.mesh,
        skipped_boundary_edges: unc.skipped_edges,
        field,
        area_mask,
        per_source,
        cloud,
    })
}

fn build_cloud(
    rig: &CameraRig,
    target_id: &str,
    field: &TargetRayField,
    per_source: &BTreeMap<String, SourceRegistration>,
    images: &BTreeMap<String, ImageBuf>,
    interp: Interp,
) -> MultimodalPointCloud {
    // One point per certain-object pixel, in row-major pixel order.
    let mut points = Vec::new();
    let mut target_pixels = Vec::new();
    let mut pixel_index = Vec::new(); // flat target index per point
    for row in 0..field.height {
        for col in 0..field.width {
            let s = field.sample(col, row);
            if s.area == ProjectionCase::CertainObject {
                let hit = s.object_hit.as_ref().expect("P4 pixel has a hit");
                points.push(hit.point.coords);
                target_pixels.push([col, row]);
                pixel_index.push((row * field.width + col) as usize);
            }
        }
    }

    let mut channels = Vec::new();
    for cam in rig.cameras() {
        let Some(img) = images.get(&cam.id) else {
            continue;
        };
        let nch = img.channels;
        let mut values = vec![0.0f32; points.len() * nch as usize];
        let mut case_codes = vec![0u8; points.len()];
        if cam.id == target_id {
            // The target's own modality: the pixel value itself.
            for (pt, &[col, row]) in target_pixels.iter().enumerate() {
                for c in 0..nch {
                    values[pt * nch as usize + c as usize] = img.get(col, row, c);
                }
                case_codes[pt] = ProjectionCase::CertainMatch.mask_code();
            }
        } else {
            let reg = &per_source[&cam.id];
            for (pt, &flat) in pixel_index.iter().enumerate() {
                let entry = &reg.map.entries()[flat];
                if let Some(px) = &entry.source_px {
                    for c in 0..nch {
                        let v = match interp {
                            Interp::Bilinear => img.sample_bilinear(px.u, px.v, c),
                            Interp::Nearest => img.sample_nearest(px.u, px.v, c),
                        };
                        values[pt * nch as usize + c as usize] = v;
                    }
                    case_codes[pt] = entry.case.mask_code();
                }
            }
        }
        channels.push(CloudChannel {
            camera_id: cam.id.clone(),
            modality: cam.modality.clone(),
            channels: nch,
            values,
            case_codes,
        });
    }

    MultimodalPointCloud {
        frame: rig.depth_frame(),
        points,
        target_pixels,
        channels,
    }
}
