//! Feeds a walker and a jittering pillar to the tracker and prints labels,
//! continuity and estimated velocity.

use dynmap::geometry::{Frame, ObstacleBox};
use dynmap::tracker::{Tracker, TrackerConfig};
use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = TrackerConfig::default();
    let mut tracker = Tracker::new(cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let jitter = Normal::new(0.0, 0.03)?;
    let size = Vector3::new(0.4, 0.4, 1.7);

    for frame in 0..60u64 {
        let t = frame as f64 * cfg.dt;
        let walker = Vector2::new(2.0, -1.0) + Vector2::new(0.2, 1.2) * t;
        let pillar = Vector2::new(5.0, 2.0) + Vector2::new(jitter.sample(&mut rng), jitter.sample(&mut rng));
        let dets = [
            ObstacleBox::new(Frame::Map, Vector3::new(walker.x, walker.y, 0.85), size)?,
            ObstacleBox::new(Frame::Map, Vector3::new(pillar.x, pillar.y, 0.85), size)?,
        ];
        tracker.step(frame, &dets, None)?;
        if frame % 10 == 9 {
            for tr in tracker.tracks() {
                let v = tr.velocity();
                let c = tr.continuity.map_or("-".to_string(), |c| format!("{c:+.2}"));
                println!("frame {frame:2} track {} {:?}: C_con {c}, v = ({:+.2}, {:+.2})", tr.id, tr.label, v.x, v.y);
            }
        }
    }
    Ok(())
}
