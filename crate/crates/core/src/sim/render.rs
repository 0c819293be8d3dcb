use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::scenario::NoiseModel;
use crate::geometry::{CameraIntrinsics, DepthImage, ObstacleBox, Pose};

/// Ray parameter at which `origin + t dir` enters `[lo, hi]`, if it does
/// so in front of the origin.
fn slab_entry(origin: &Vector3<f64>, dir: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Option<f64> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for a in 0..3 {
        if dir[a] == 0.0 {
            if origin[a] < lo[a] || origin[a] > hi[a] {
                return None;
            }
        } else {
            let inv = 1.0 / dir[a];
            let (ta, tb) = ((lo[a] - origin[a]) * inv, (hi[a] - origin[a]) * inv);
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    (t0 <= t1 && t0 > 0.0).then_some(t0)
}

/// Renders the boxes into a depth image from `pose`.
///
/// Each pixel casts one ray through its center; the depth is the optical
/// axis coordinate of the nearest hit. Hits outside the depth range are
/// invalid. Noise is drawn from a per-row stream of `seed`, so images are
/// reproducible regardless of thread scheduling.
pub fn render_depth(
    boxes: &[ObstacleBox],
    pose: &Pose,
    intr: &CameraIntrinsics,
    noise: &NoiseModel,
    seed: u64,
    frame: u64,
) -> DepthImage {
    let (w, h) = (intr.width, intr.height);
    let bounds: Vec<(Vector3<f64>, Vector3<f64>)> = boxes.iter().map(|b| (b.min(), b.max())).collect();
    let origin = pose.translation;
    let mut data = vec![0.0f32; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((frame << 24) | v as u64);
        for (u, px) in row.iter_mut().enumerate() {
            // camera-frame direction with unit optical component, so the ray
            // parameter is the depth
            let dc = Vector3::new((u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0);
            let dir = pose.rotation * dc;
            let hit = bounds
                .iter()
                .filter_map(|(lo, hi)| slab_entry(&origin, &dir, lo, hi))
                .fold(f64::INFINITY, f64::min);
            // draw noise for every pixel so the stream does not depend on the scene
            let z: f64 = StandardNormal.sample(&mut rng);
            let drop = rng.random::<f64>() < noise.dropout;
            if !hit.is_finite() || hit < intr.depth_min || hit > intr.depth_max || drop {
                continue;
            }
            let d = hit + z * (noise.sigma0 + noise.sigma1 * hit * hit);
            if d >= intr.depth_min && d <= intr.depth_max {
                *px = d as f32;
            }
        }
    });
    DepthImage::new(*intr, data).expect("buffer matches intrinsics")
}
