//! Environment-aware Markov-chain trajectory prediction over a library of
//! candidate paths, plus a constant-velocity straight-line baseline.

mod library;
mod markov;

use std::collections::HashMap;
use std::path::PathBuf;

use nalgebra::{DMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::occupancy::{polyline_length, OccupancyGrid};
use crate::tracker::TrackedObstacle;

pub use library::{PathLibrary, PathTemplate};
pub use markov::{
    build_initial_distribution, build_transition_matrix, predict_step, softmax, PathDistribution, StepOutcome,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    /// Number of library paths `l` (odd).
    pub path_count: usize,
    /// Curvature of the sharpest generated turn, 1/m.
    pub kappa_max: f64,
    /// Prediction horizon, seconds.
    pub horizon: f64,
    /// Speed at which the generated templates span the horizon, m/s.
    pub nominal_speed: f64,
    /// Polyline sample spacing of the templates, meters.
    pub sample_step: f64,
    pub sigma_init: f64,
    pub sigma_trans: f64,
    /// Softmax scale on collision distances, 1/m.
    pub softmax_temperature: f64,
    /// Below this speed the environment probability is uniform.
    pub min_speed: f64,
    /// Optional template file replacing the generated arcs.
    pub library_file: Option<PathBuf>,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            path_count: 5,
            kappa_max: 0.5,
            horizon: 3.0,
            nominal_speed: 1.0,
            sample_step: 0.1,
            sigma_init: 1.0,
            sigma_trans: 1.0,
            softmax_temperature: 1.0,
            min_speed: 0.05,
            library_file: None,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.horizon, self.nominal_speed, self.sample_step, self.sigma_init, self.sigma_trans, self.softmax_temperature];
        if positive.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::config("predictor horizon, speeds, widths and temperature must be > 0"));
        }
        if self.path_count < 3 || self.path_count % 2 == 0 {
            return Err(Error::config("path_count must be odd and >= 3"));
        }
        if self.min_speed < 0.0 {
            return Err(Error::config("min_speed must be >= 0"));
        }
        Ok(())
    }

    pub fn library(&self) -> Result<PathLibrary> {
        match &self.library_file {
            Some(p) => PathLibrary::load(p, self.horizon, self.sample_step),
            None => PathLibrary::generate(
                self.path_count,
                self.kappa_max,
                self.nominal_speed * self.horizon,
                self.horizon,
                self.sample_step,
            ),
        }
    }
}

/// Planar kinematic state the predictor needs from a track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleMotion {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    /// Height at which paths are checked against the map.
    pub z: f64,
}

impl From<&TrackedObstacle> for ObstacleMotion {
    fn from(t: &TrackedObstacle) -> Self {
        Self { position: t.position(), velocity: t.velocity(), z: t.bx.center.z }
    }
}

/// Collision-free distance along each library path in the map frame. A
/// clear path scores its full scaled length, `speed * horizon`.
pub fn path_distances(motion: &ObstacleMotion, lib: &PathLibrary, grid: &OccupancyGrid) -> Result<Vec<f64>> {
    let full = motion.velocity.norm() * lib.horizon();
    (0..lib.len())
        .map(|i| {
            let hit = grid.first_collision(&lib.map_polyline(i, motion.position, motion.velocity, motion.z))?;
            Ok(hit.map_or(full, |d| d.min(full)))
        })
        .collect()
}

/// Softmax of the scaled collision distances; uniform below `min_speed`.
pub fn environment_probability(
    motion: &ObstacleMotion,
    lib: &PathLibrary,
    grid: &OccupancyGrid,
    cfg: &PredictorConfig,
) -> Result<Vec<f64>> {
    if motion.velocity.norm() < cfg.min_speed {
        return Ok(vec![1.0 / lib.len() as f64; lib.len()]);
    }
    Ok(softmax(&path_distances(motion, lib, grid)?, cfg.softmax_temperature))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedPath {
    pub points: Vec<Vector3<f64>>,
    /// False when the path hits the static map or no path could be chosen.
    pub success: bool,
}

/// The most likely path in the map frame and whether it is collision-free.
pub fn predicted_trajectory(
    motion: &ObstacleMotion,
    dist: &PathDistribution,
    lib: &PathLibrary,
    grid: &OccupancyGrid,
) -> Result<PredictedPath> {
    let points = lib.map_polyline(dist.argmax(), motion.position, motion.velocity, motion.z);
    let success = grid.first_collision(&points)?.is_none();
    Ok(PredictedPath { points, success })
}

/// Straight path along the current velocity covering `speed * horizon`.
pub fn linear_prediction(motion: &ObstacleMotion, horizon: f64, grid: &OccupancyGrid) -> Result<PredictedPath> {
    let start = Vector3::new(motion.position.x, motion.position.y, motion.z);
    let end = start + Vector3::new(motion.velocity.x, motion.velocity.y, 0.0) * horizon;
    let points = vec![start, end];
    let success = grid.first_collision(&points)?.is_none();
    Ok(PredictedPath { points, success })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub track_id: u64,
    pub dist: PathDistribution,
    pub chosen: usize,
    pub path: PredictedPath,
    /// The chain restarted from the prior this frame.
    pub reset: bool,
}

impl Prediction {
    pub fn length(&self) -> f64 {
        polyline_length(&self.path.points)
    }
}

/// Per-track Markov chains over a shared path library.
#[derive(Debug, Clone)]
pub struct MarkovPredictor {
    cfg: PredictorConfig,
    lib: PathLibrary,
    init: PathDistribution,
    trans: DMatrix<f64>,
    chains: HashMap<u64, PathDistribution>,
}

impl MarkovPredictor {
    pub fn new(cfg: PredictorConfig) -> Result<Self> {
        cfg.validate()?;
        let lib = cfg.library()?;
        let init = build_initial_distribution(lib.len(), cfg.sigma_init)?;
        let trans = build_transition_matrix(lib.len(), cfg.sigma_trans)?;
        Ok(Self { cfg, lib, init, trans, chains: HashMap::new() })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.cfg
    }

    pub fn library(&self) -> &PathLibrary {
        &self.lib
    }

    pub fn chain(&self, id: u64) -> Option<&PathDistribution> {
        self.chains.get(&id)
    }

    /// Advances the chain of `id` by one frame and returns its prediction.
    pub fn predict(&mut self, id: u64, motion: &ObstacleMotion, grid: &OccupancyGrid) -> Result<Prediction> {
        let p_env = environment_probability(motion, &self.lib, grid, &self.cfg)?;
        let prior = self.chains.get(&id).unwrap_or(&self.init);
        let step = predict_step(prior, &self.trans, &p_env, &self.init)?;
        let mut path = predicted_trajectory(motion, &step.dist, &self.lib, grid)?;
        if step.reset {
            path.success = false;
        }
        let chosen = step.dist.argmax();
        self.chains.insert(id, step.dist.clone());
        Ok(Prediction { track_id: id, dist: step.dist, chosen, path, reset: step.reset })
    }

    /// Drops the chain of a track that turned static or retired.
    pub fn reset(&mut self, id: u64) {
        self.chains.remove(&id);
    }

    /// Keeps only the chains whose ids satisfy `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(u64) -> bool) {
        self.chains.retain(|&id, _| keep(id));
    }
}
