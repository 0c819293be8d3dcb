//! Synthetic scenes, depth rendering, the frame-loop driver and scoring.

mod metrics;
mod pipeline;
mod records;
mod render;
mod scenario;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use metrics::{evaluate, Confusion, MetricsReport, RuntimeReport, MATCH_DISTANCE, METRICS_HEADER, RUNTIME_HEADER};
pub use pipeline::{run_scenario, FrameOutput, Pipeline, PipelineConfig, Simulation};
pub use records::{
    read_records, write_records, DetectionRecord, FrameRecord, GroundTruth, PredictionRecord, PredictorKind,
    RecordsHeader, Timings, TrackRecord, RECORDS_FORMAT,
};
pub use render::render_depth;
pub use scenario::{
    load_overrides, Agent, AgentState, ArcSpec, CameraSpec, MapBounds, NoiseModel, Scenario, StaticBox, SCENARIO_FORMAT,
};

/// Bundled scenes of decreasing clutter.
pub mod golden {
    use super::Scenario;

    pub const CORRIDOR: &str = include_str!("../../scenarios/a_corridor.toml");
    pub const ROOM: &str = include_str!("../../scenarios/b_room.toml");
    pub const FIELD: &str = include_str!("../../scenarios/c_field.toml");

    pub fn corridor() -> Scenario {
        Scenario::parse(CORRIDOR).expect("bundled scenario parses")
    }

    pub fn room() -> Scenario {
        Scenario::parse(ROOM).expect("bundled scenario parses")
    }

    pub fn field() -> Scenario {
        Scenario::parse(FIELD).expect("bundled scenario parses")
    }

    /// All three, most cluttered first.
    pub fn all() -> [(&'static str, Scenario); 3] {
        [("A", corridor()), ("B", room()), ("C", field())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorComparison {
    pub markov_predictions: usize,
    pub markov_failed: usize,
    pub markov_failure_ratio: f64,
    pub linear_predictions: usize,
    pub linear_failed: usize,
    pub linear_failure_ratio: f64,
}

/// Runs the scenario once per predictor with the same seed and reports both
/// failure ratios.
pub fn compare_predictors(scenario: &Scenario, cfg: &PipelineConfig) -> Result<PredictorComparison> {
    let run = |kind| -> Result<MetricsReport> {
        let cfg = PipelineConfig { predictor_kind: kind, ..cfg.clone() };
        Ok(evaluate(&run_scenario(scenario, &cfg)?))
    };
    let m = run(PredictorKind::Markov)?;
    let l = run(PredictorKind::Linear)?;
    Ok(PredictorComparison {
        markov_predictions: m.predictions,
        markov_failed: m.failed_predictions,
        markov_failure_ratio: m.failure_ratio,
        linear_predictions: l.predictions,
        linear_failed: l.failed_predictions,
        linear_failure_ratio: l.failure_ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub repeats: usize,
    pub runtime: RuntimeReport,
}

/// Times the pipeline over the first `frames` frames (all when `None`),
/// `repeats` times, optionally at another image size. Rendering is timed
/// but kept out of the pipeline total.
pub fn bench(
    scenario: &Scenario,
    cfg: &PipelineConfig,
    repeats: usize,
    size: Option<(usize, usize)>,
    frames: Option<usize>,
) -> Result<BenchReport> {
    let base = scenario.intrinsics()?;
    let intr = match size {
        Some((w, h)) => base.rescaled(w, h)?,
        None => base,
    };
    let n = frames.unwrap_or(usize::MAX).min(scenario.frame_count());
    let mut all = Vec::new();
    for _ in 0..repeats.max(1) {
        let mut sim = Simulation::with_intrinsics(scenario, cfg.clone(), intr)?;
        for _ in 0..n {
            match sim.step()? {
                Some(r) => all.push(r),
                None => break,
            }
        }
    }
    Ok(BenchReport {
        width: intr.width,
        height: intr.height,
        frames: n,
        repeats: repeats.max(1),
        runtime: evaluate(&all).runtime,
    })
}
