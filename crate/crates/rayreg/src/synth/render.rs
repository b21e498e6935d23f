//! Depth and modality rendering of analytic scenes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{GeomError, PixelCoord, Point3};
use crate::image::ImageBuf;
use crate::mesh::DepthMap;
use crate::rig::CameraModel;

use super::scene::Scene;

/// Depth rendering controls. Noise and flying-pixel corruption are seeded
/// and default off.
#[derive(Clone, Copy, Debug)]
pub struct DepthRenderOptions {
    pub noise_sigma: f64,
    pub flying_pixels: bool,
    pub seed: u64,
}

impl Default for DepthRenderOptions {
    fn default() -> Self {
        DepthRenderOptions {
            noise_sigma: 0.0,
            flying_pixels: false,
            seed: 0,
        }
    }
}

/// Depth step treated as a silhouette for flying-pixel corruption, meters.
const FLYING_PIXEL_STEP: f64 = 0.05;

/// Render the metric depth map a camera would record of the scene: per pixel
/// the Z coordinate (in the camera frame) of the nearest analytic hit.
pub fn render_depth(
    scene: &Scene,
    camera: &CameraModel,
    options: &DepthRenderOptions,
) -> Result<DepthMap, GeomError> {
    let intr = camera.intrinsics;
    let mut dm = DepthMap::new(intr);
    for row in 0..intr.height {
        for col in 0..intr.width {
            let (origin, dir) = camera.pixel_ray_in_depth(&PixelCoord::center(col, row))?;
            if let Some(hit) = scene.first_hit(&origin.coords, &dir, 0.0) {
                let p = Point3::from_vector(origin.coords + dir * hit.t, origin.frame);
                let z_cam = camera.from_depth.apply(&p)?.z();
                if z_cam > 0.0 {
                    dm.set(col, row, z_cam).expect("positive finite depth");
                }
            }
        }
    }

    if options.flying_pixels {
        corrupt_silhouettes(&mut dm, options.seed);
    }
    if options.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, options.noise_sigma).expect("valid sigma");
        for row in 0..dm.height {
            // One RNG stream per row: results do not depend on traversal
            // order or parallelism.
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(row as u64 + 1);
            for col in 0..dm.width {
                let n = normal.sample(&mut rng);
                if let Some(d) = dm.get(col, row) {
                    let noisy = d + n;
                    if noisy > 0.0 {
                        dm.set(col, row, noisy).unwrap();
                    } else {
                        dm.clear(col, row);
                    }
                }
            }
        }
    }
    Ok(dm)
}

/// Replace pixels bordering a depth discontinuity with a random mixture of
/// the near and far side, mimicking time-of-flight mixed returns.
fn corrupt_silhouettes(dm: &mut DepthMap, seed: u64) {
    let mut mixed: Vec<(u32, u32, f64)> = Vec::new();
    for row in 0..dm.height {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x666c7970);
        rng.set_stream(row as u64 + 1);
        for col in 0..dm.width {
            let Some(d) = dm.get(col, row) else { continue };
            let mut lo = d;
            let mut hi = d;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let r = row as i64 + dr;
                    let c = col as i64 + dc;
                    if r < 0 || c < 0 || r >= dm.height as i64 || c >= dm.width as i64 {
                        continue;
                    }
                    if let Some(n) = dm.get(c as u32, r as u32) {
                        lo = lo.min(n);
                        hi = hi.max(n);
                    }
                }
            }
            use rand::Rng;
            let lambda: f64 = rng.random_range(0.2..0.8);
            if hi - lo > FLYING_PIXEL_STEP {
                mixed.push((col, row, lo + lambda * (hi - lo)));
            }
        }
    }
    for (col, row, d) in mixed {
        dm.set(col, row, d).unwrap();
    }
}

/// Render the single-channel modality image a camera records: the texture
/// value of the nearest primitive at each pixel, 0 for background.
pub fn render_modality(scene: &Scene, camera: &CameraModel) -> Result<ImageBuf, GeomError> {
    let intr = camera.intrinsics;
    let mut img = ImageBuf::zeros(intr.width, intr.height, 1);
    for row in 0..intr.height {
        for col in 0..intr.width {
            let (origin, dir) = camera.pixel_ray_in_depth(&PixelCoord::center(col, row))?;
            if let Some(hit) = scene.first_hit(&origin.coords, &dir, 0.0) {
                img.set(col, row, 0, scene.texture_at(&hit) as f32);
            }
        }
    }
    Ok(img)
}
