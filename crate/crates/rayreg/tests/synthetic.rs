//! Cross-checks between the analytic renderer/ground truth and the
//! mesh-based pipeline.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use rayreg::geometry::Point3;
use rayreg::raycast::Bvh;
use rayreg::register::{cast_target_rays, register_all, ProjectionCase, RegistrationOptions};
use rayreg::synth::{
    desk_rig, ground_truth, render_depth, render_modality, DepthRenderOptions,
    GroundTruthOptions, Pose, Primitive, Scene, Texture,
};

#[test]
fn gradient_values_agree_at_ground_truth_correspondences() {
    let rig = desk_rig(4);
    let scene = Scene {
        primitives: vec![(
            Primitive::Plane {
                center_x: 0.0,
                center_y: 0.0,
                z: 0.9,
                half_extent: 5.0,
            },
            Texture::Gradient {
                offset: 0.5,
                slope_u: 0.3,
                slope_v: -0.2,
            },
        )],
        ground_z: 1.2,
    };
    let target_img = render_modality(&scene, &rig.camera("ir").unwrap().model).unwrap();
    let source_img = render_modality(&scene, &rig.camera("narrow").unwrap().model).unwrap();
    let gt = ground_truth(&scene, &rig, "ir", &GroundTruthOptions::default()).unwrap();
    let gt_src = &gt.sources["narrow"];

    let mut n = 0;
    for row in 0..gt.height {
        for col in 0..gt.width {
            let i = (row * gt.width + col) as usize;
            let (Some(px), true) = (&gt_src.pixel[i], gt_src.visible[i]) else {
                continue;
            };
            // Stay away from image borders where bilinear clamping kicks in.
            if px.u < 1.0
                || px.v < 1.0
                || px.u > source_img.width as f64 - 1.0
                || px.v > source_img.height as f64 - 1.0
            {
                continue;
            }
            let target_value = target_img.get(col, row, 0) as f64;
            let sampled = source_img.sample_bilinear(px.u, px.v, 0) as f64;
            assert!(
                (target_value - sampled).abs() <= 1e-3,
                "pixel ({col},{row}): {target_value} vs {sampled}"
            );
            n += 1;
        }
    }
    assert!(n > 5000, "only {n} correspondences checked");
}

/// Sub-pixel shift between two images by scanning integer offsets of the
/// normalized cross-correlation and refining with a parabolic fit.
fn estimate_shift_px(a: &rayreg::ImageBuf, b: &rayreg::ImageBuf, axis: usize) -> f64 {
    let w = a.width as i64;
    let h = a.height as i64;
    let score = |shift: i64| -> f64 {
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for row in 2..h - 2 {
            for col in 2..w - 2 {
                let (sc, sr) = if axis == 0 { (col + shift, row) } else { (col, row + shift) };
                if sc < 0 || sr < 0 || sc >= w || sr >= h {
                    continue;
                }
                let va = (a.get(col as u32, row as u32, 0) - 0.5) as f64;
                let vb = (b.get(sc as u32, sr as u32, 0) - 0.5) as f64;
                if a.get(col as u32, row as u32, 0) == 0.0 || b.get(sc as u32, sr as u32, 0) == 0.0
                {
                    continue; // unmapped
                }
                num += va * vb;
                da += va * va;
                db += vb * vb;
            }
        }
        num / (da.sqrt() * db.sqrt()).max(1e-12)
    };
    let mut best = 0i64;
    let mut best_score = f64::NEG_INFINITY;
    for s in -3..=3 {
        let v = score(s);
        if v > best_score {
            best_score = v;
            best = s;
        }
    }
    let (sm, s0, sp) = (score(best - 1), score(best), score(best + 1));
    let denom = sm - 2.0 * s0 + sp;
    let frac = if denom.abs() > 1e-12 {
        0.5 * (sm - sp) / denom
    } else {
        0.0
    };
    best as f64 + frac
}

#[test]
fn registered_checker_phase_is_aligned() {
    let rig = desk_rig(4);
    // 1 cm checker period = 5 mm squares.
    let scene = Scene {
        primitives: vec![(
            Primitive::Plane {
                center_x: 0.0,
                center_y: 0.0,
                z: 0.9,
                half_extent: 5.0,
            },
            Texture::Checker {
                pitch: 0.005,
                value0: 0.25,
                value1: 0.85,
            },
        )],
        ground_z: 1.2,
    };
    let depth = render_depth(&scene, &rig.depth_camera().model, &DepthRenderOptions::default())
        .unwrap();
    let mut images = BTreeMap::new();
    for cam in rig.cameras() {
        images.insert(cam.id.clone(), render_modality(&scene, &cam.model).unwrap());
    }
    let out = register_all(&rig, "ir", &depth, &images, &RegistrationOptions::default()).unwrap();
    let reference = &images["ir"];
    let registered = out.per_source["narrow"].image.as_ref().unwrap();

    for axis in [0, 1] {
        let shift = estimate_shift_px(reference, registered, axis);
        assert!(
            shift.abs() <= 0.5,
            "checker phase offset {shift} px on axis {axis}"
        );
    }
}

#[test]
fn mesh_hits_stay_within_discretization_bound_of_analytic_hits() {
    let rig = desk_rig(2);
    // A sloped plane: z = 0.9 + 0.35 * x (rotation about the y axis).
    let angle = 0.35f64.atan();
    let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), -angle).into_inner();
    let scene = Scene {
        primitives: vec![(
            Primitive::Rectangle {
                pose: Pose::new(rot, Vector3::new(0.0, 0.0, 0.9)),
                half_u: 0.6,
                half_v: 0.6,
            },
            Texture::Constant { value: 0.5 },
        )],
        ground_z: 1.2,
    };
    let depth_cam = &rig.depth_camera().model;
    let depth = render_depth(&scene, depth_cam, &DepthRenderOptions::default()).unwrap();
    let grid = rayreg::mesh::vertices_from_depth(&depth, &rig.roi, rig.depth_frame());
    let mesh = rayreg::mesh::build_object_mesh(&grid, 80.0);
    let bvh = Bvh::build(&mesh);
    let field = cast_target_rays(&rig, "wide", &bvh, &Bvh::build(&rayreg::TriangleMesh::empty(rig.depth_frame())), None)
        .unwrap();
    let gt = ground_truth(&scene, &rig, "wide", &GroundTruthOptions::default()).unwrap();

    let fx = depth_cam.intrinsics.fx;
    let mut checked = 0;
    let mut worst = 0.0f64;
    for (i, s) in field.samples().iter().enumerate() {
        let (Some(hit), Some(truth)) = (&s.object_hit, &gt.hits[i]) else {
            continue;
        };
        let err_m = (hit.point.coords - truth.point).norm();
        let px_equivalent = err_m * fx / truth.point.z;
        worst = worst.max(px_equivalent);
        checked += 1;
    }
    assert!(checked > 10_000);
    assert!(
        worst <= 2.0,
        "mesh vs analytic hit discrepancy {worst} px-equivalent"
    );
}

#[test]
fn area_mask_codes_round_trip_the_field() {
    let rig = desk_rig(8);
    let scene = Scene {
        primitives: vec![
            (
                Primitive::Plane {
                    center_x: 0.0,
                    center_y: 0.0,
                    z: 1.1,
                    half_extent: 5.0,
                },
                Texture::Constant { value: 0.4 },
            ),
            (
                Primitive::Disk {
                    pose: Pose::at(Vector3::new(0.03, -0.02, 0.55)),
                    radius: 0.1,
                },
                Texture::Constant { value: 0.8 },
            ),
        ],
        ground_z: 1.2,
    };
    let depth = render_depth(&scene, &rig.depth_camera().model, &DepthRenderOptions::default())
        .unwrap();
    let out = register_all(&rig, "wide", &depth, &BTreeMap::new(), &RegistrationOptions::default())
        .unwrap();
    for (i, s) in out.field.samples().iter().enumerate() {
        let code = out.area_mask[i];
        match s.area {
            ProjectionCase::CertainObject => assert_eq!(code, 1),
            ProjectionCase::UncertainObject => assert_eq!(code, 5),
            ProjectionCase::CertainBackground => assert_eq!(code, 6),
            _ => unreachable!(),
        }
    }
    // All three area codes occur in this scene.
    for code in [1u8, 5, 6] {
        assert!(out.area_mask.contains(&code), "missing code {code}");
    }
    let _ = Point3::new(0.0, 0.0, 0.0, rig.depth_frame());
}
