//! Markov-chain path prediction for a walker heading toward a wall with an
//! opening on its left.

use dynmap::geometry::{Frame, ObstacleBox};
use dynmap::occupancy::{MapConfig, OccupancyGrid};
use dynmap::predictor::{linear_prediction, MarkovPredictor, ObstacleMotion, PredictorConfig};
use nalgebra::{Vector2, Vector3};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut grid = OccupancyGrid::covering(Vector3::new(0.0, -4.0, 0.0), Vector3::new(8.0, 4.0, 2.5), &MapConfig::default())?;
    let wall = ObstacleBox::from_min_max(Frame::Map, Vector3::new(2.5, -4.0, 0.0), Vector3::new(2.8, -0.2, 2.5))?;
    let cells: Vec<_> = grid.voxels_in_box(&wall).collect();
    for v in cells {
        grid.mark_occupied(v);
    }

    let cfg = PredictorConfig::default();
    let mut predictor = MarkovPredictor::new(cfg.clone())?;
    let mut motion = ObstacleMotion { position: Vector2::new(0.5, -0.6), velocity: Vector2::new(1.0, 0.0), z: 0.85 };
    for step in 0..5 {
        let p = predictor.predict(0, &motion, &grid)?;
        let probs: Vec<String> = p.dist.probs.iter().map(|x| format!("{x:.2}")).collect();
        let end = p.path.points.last().copied().unwrap_or_default();
        println!(
            "step {step}: path {} of {} ends at ({:.2}, {:.2}), collision-free {}  [{}]",
            p.chosen,
            cfg.path_count,
            end.x,
            end.y,
            p.path.success,
            probs.join(" ")
        );
        motion.position += motion.velocity * 0.1;
    }
    let lin = linear_prediction(&motion, cfg.horizon, &grid)?;
    println!("straight-line prediction collision-free: {}", lin.success);
    Ok(())
}
