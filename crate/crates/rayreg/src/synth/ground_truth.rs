//! Brute-force ground truth for a rig viewing an analytic scene: exact hit
//! points, exact source pixels, exact visibility, and dense sampling of the
//! depth camera's shadow volume.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::geometry::PixelCoord;
use crate::rig::CameraRig;

use super::scene::Scene;
use super::SynthError;

/// Segment endpoint guard for analytic occlusion tests, meters.
const ANALYTIC_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GtArea {
    /// The ray hits a surface before entering hidden space.
    Object,
    /// The ray enters space hidden from the depth camera first.
    UncertainObject,
    /// Neither surface nor hidden space.
    Background,
}

#[derive(Clone, Copy, Debug)]
pub struct GtHit {
    pub point: Vector3<f64>,
    pub t: f64,
    pub primitive: usize,
}

/// Per-source-camera ground truth, indexed per target pixel.
#[derive(Clone, Debug)]
pub struct GtSource {
    /// Exact projection of the hit point (raw coordinates), when in bounds
    /// and in front of the camera.
    pub pixel: Vec<Option<PixelCoord>>,
    /// Line of sight from the hit point to this camera is unobstructed.
    pub visible: Vec<bool>,
    /// The segment from the hit point to this camera crosses the depth
    /// camera's shadow volume.
    pub outgoing_occluded: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub target_id: String,
    pub width: u32,
    pub height: u32,
    pub hits: Vec<Option<GtHit>>,
    pub area: Vec<GtArea>,
    pub sources: BTreeMap<String, GtSource>,
}

#[derive(Clone, Copy, Debug)]
pub struct GroundTruthOptions {
    /// Step for dense shadow-volume sampling, meters.
    pub sample_step: f64,
}

impl Default for GroundTruthOptions {
    fn default() -> Self {
        GroundTruthOptions { sample_step: 5e-4 }
    }
}

/// True when any sample point of the open segment from `a` towards `b`
/// (excluding a margin at both ends) lies in the shadow volume of `eye`.
fn segment_crosses_shadow(
    scene: &Scene,
    eye: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    step: f64,
) -> bool {
    let d = b - a;
    let len = d.norm();
    if len <= 2.0 * ANALYTIC_EPSILON {
        return false;
    }
    let dir = d / len;
    let mut t = step * 0.5;
    while t < len - ANALYTIC_EPSILON {
        let q = a + dir * t;
        if scene.in_shadow_volume(eye, &q, ANALYTIC_EPSILON) {
            return true;
        }
        t += step;
    }
    false
}

/// Compute ground truth for every pixel of the target camera.
pub fn ground_truth(
    scene: &Scene,
    rig: &CameraRig,
    target_id: &str,
    options: &GroundTruthOptions,
) -> Result<GroundTruth, SynthError> {
    let target = rig.camera(target_id)?;
    let width = target.model.intrinsics.width;
    let height = target.model.intrinsics.height;
    let eye = Vector3::zeros(); // depth camera center in its own frame
    let step = options.sample_step;

    struct RowOut {
        hits: Vec<Option<GtHit>>,
        area: Vec<GtArea>,
        per_source: Vec<(Vec<Option<PixelCoord>>, Vec<bool>, Vec<bool>)>,
    }

    let sources: Vec<&crate::rig::Camera> = rig.cameras().iter().collect();
    let rows: Vec<RowOut> = (0..height)
        .into_par_iter()
        .map(|row| {
            let mut out = RowOut {
                hits: Vec::with_capacity(width as usize),
                area: Vec::with_capacity(width as usize),
                per_source: sources
                    .iter()
                    .map(|_| {
                        (
                            Vec::with_capacity(width as usize),
                            Vec::with_capacity(width as usize),
                            Vec::with_capacity(width as usize),
                        )
                    })
                    .collect(),
            };
            for col in 0..width {
                let (origin, dir) = target
                    .model
                    .pixel_ray_in_depth(&PixelCoord::center(col, row))
                    .expect("target pixel undistorts");
                let hit = scene.first_hit(&origin.coords, &dir, 0.0);

                let (area, gt_hit) = match hit {
                    Some(h) => {
                        let point = origin.coords + dir * h.t;
                        let before = segment_crosses_shadow(scene, &eye, &origin.coords, &point, step);
                        let area = if before {
                            GtArea::UncertainObject
                        } else {
                            GtArea::Object
                        };
                        (
                            area,
                            Some(GtHit {
                                point,
                                t: h.t,
                                primitive: h.primitive,
                            }),
                        )
                    }
                    None => {
                        // Sample until the ray leaves the volume of interest.
                        let t_end = if dir.z > 1e-12 {
                            (scene.ground_z - origin.coords.z) / dir.z
                        } else {
                            0.0
                        };
                        let area = if t_end > 0.0
                            && segment_crosses_shadow(
                                scene,
                                &eye,
                                &origin.coords,
                                &(origin.coords + dir * t_end),
                                step,
                            ) {
                            GtArea::UncertainObject
                        } else {
                            GtArea::Background
                        };
                        (area, None)
                    }
                };
                out.hits.push(gt_hit);
                out.area.push(area);

                for (src_idx, src) in sources.iter().enumerate() {
                    let (pixels, visible, occluded) = &mut out.per_source[src_idx];
                    match &gt_hit {
                        Some(h) => {
                            let p = crate::geometry::Point3::from_vector(h.point, rig.depth_frame());
                            let px = src.model.project_from_depth(&p).ok().flatten().filter(|px| {
                                px.u >= 0.0
                                    && px.u < src.model.intrinsics.width as f64
                                    && px.v >= 0.0
                                    && px.v < src.model.intrinsics.height as f64
                            });
                            let center = src.model.center_in_depth().coords;
                            let vis = !scene.segment_blocked(&center, &h.point, ANALYTIC_EPSILON);
                            let occ =
                                segment_crosses_shadow(scene, &eye, &h.point, &center, step);
                            pixels.push(px);
                            visible.push(vis);
                            occluded.push(occ);
                        }
                        None => {
                            pixels.push(None);
                            visible.push(false);
                            occluded.push(false);
                        }
                    }
                }
            }
            out
        })
        .collect();

    let n = (width as usize) * (height as usize);
    let mut hits = Vec::with_capacity(n);
    let mut area = Vec::with_capacity(n);
    let mut source_data: Vec<(Vec<Option<PixelCoord>>, Vec<bool>, Vec<bool>)> = sources
        .iter()
        .map(|_| (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)))
        .collect();
    for mut row in rows {
        hits.append(&mut row.hits);
        area.append(&mut row.area);
        for (i, (p, v, o)) in row.per_source.iter_mut().enumerate() {
            source_data[i].0.append(p);
            source_data[i].1.append(v);
            source_data[i].2.append(o);
        }
    }

    let mut source_map = BTreeMap::new();
    for (i, src) in sources.iter().enumerate() {
        let (pixel, visible, outgoing_occluded) = std::mem::take(&mut source_data[i]);
        source_map.insert(
            src.id.clone(),
            GtSource {
                pixel,
                visible,
                outgoing_occluded,
            },
        );
    }

    Ok(GroundTruth {
        target_id: target_id.to_string(),
        width,
        height,
        hits,
        area,
        sources: source_map,
    })
}
