use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::records::{DetectionRecord, FrameRecord, GroundTruth, PredictionRecord, PredictorKind, Timings, TrackRecord};
use super::render::render_depth;
use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage, Pose};
use crate::occupancy::{
    clean_dynamic_region, refine_box, CleanHistory, DynamicBoxHistory, MapConfig, OccupancyGrid, RefineConfig, Refined,
};
use crate::predictor::{linear_prediction, MarkovPredictor, ObstacleMotion, PredictorConfig};
use crate::tracker::{Label, Tracker, TrackerConfig};
use crate::umap::{detect_raw_boxes, DetectorConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub detector: DetectorConfig,
    pub map: MapConfig,
    pub refine: RefineConfig,
    pub tracker: TrackerConfig,
    pub predictor: PredictorConfig,
    pub predictor_kind: PredictorKind,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.map.validate()?;
        self.refine.validate()?;
        self.tracker.validate()?;
        self.predictor.validate()
    }
}

/// Per-frame results of [`Pipeline::process`].
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub detections: Vec<Refined>,
    pub predictions: Vec<PredictionRecord>,
    pub timings: Timings,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Stateful perception pipeline: map update, detection and refinement,
/// tracking and classification, dynamic-region cleaning, prediction.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    grid: OccupancyGrid,
    clean: CleanHistory,
    dynamic_boxes: DynamicBoxHistory,
    tracker: Tracker,
    markov: MarkovPredictor,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, map_min: Vector3<f64>, map_max: Vector3<f64>) -> Result<Self> {
        cfg.validate()?;
        let grid = OccupancyGrid::covering(map_min, map_max, &cfg.map)?;
        let f = cfg.map.clean_frames;
        Ok(Self {
            grid,
            clean: CleanHistory::new(f),
            dynamic_boxes: DynamicBoxHistory::new(f),
            tracker: Tracker::new(cfg.tracker.clone())?,
            markov: MarkovPredictor::new(cfg.predictor.clone())?,
            cfg,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn clean_history(&self) -> &CleanHistory {
        &self.clean
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn process(&mut self, frame: u64, img: &DepthImage, pose: &Pose) -> Result<FrameOutput> {
        let intr: CameraIntrinsics = *img.intrinsics();

        let t = Instant::now();
        self.grid.integrate_depth(img, pose, self.cfg.map.pixel_stride);
        let raw = detect_raw_boxes(img, pose, &self.cfg.detector);
        let detections: Vec<Refined> = raw
            .iter()
            .map(|r| refine_box(&self.grid, &self.clean, r, &self.cfg.refine))
            .collect::<Result<_>>()?;
        let detection_ms = ms(t);

        let t = Instant::now();
        let boxes: Vec<_> = detections.iter().map(|d| d.bx).collect();
        let report = self.tracker.step(frame, &boxes, Some((pose, &intr)))?;
        let dynamic: Vec<_> = self
            .tracker
            .tracks()
            .iter()
            .filter(|t| t.label == Label::Dynamic && t.missed == 0)
            .map(|t| t.history.back().expect("history is never empty").bx)
            .collect();
        self.dynamic_boxes.push(frame, dynamic);
        clean_dynamic_region(&mut self.grid, &mut self.clean, self.dynamic_boxes.boxes(), self.cfg.refine.c_inflate, frame);
        let tracking_ms = ms(t);

        let t = Instant::now();
        for id in &report.retired {
            self.markov.reset(*id);
        }
        let mut predictions = Vec::new();
        for track in self.tracker.tracks() {
            if track.label != Label::Dynamic {
                self.markov.reset(track.id);
                continue;
            }
            if track.missed > 0 {
                continue;
            }
            let motion = ObstacleMotion::from(track);
            let rec = match self.cfg.predictor_kind {
                PredictorKind::Markov => {
                    let p = self.markov.predict(track.id, &motion, &self.grid)?;
                    PredictionRecord {
                        track_id: track.id,
                        method: PredictorKind::Markov,
                        chosen: Some(p.chosen),
                        probs: p.dist.probs,
                        points: p.path.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
                        success: p.path.success,
                        reset: p.reset,
                    }
                }
                PredictorKind::Linear => {
                    let p = linear_prediction(&motion, self.cfg.predictor.horizon, &self.grid)?;
                    PredictionRecord {
                        track_id: track.id,
                        method: PredictorKind::Linear,
                        chosen: None,
                        probs: Vec::new(),
                        points: p.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
                        success: p.success,
                        reset: false,
                    }
                }
            };
            predictions.push(rec);
        }
        let prediction_ms = ms(t);

        Ok(FrameOutput {
            detections,
            predictions,
            timings: Timings { render_ms: 0.0, detection_ms, tracking_ms, prediction_ms },
        })
    }
}

/// Renders a scenario frame by frame and feeds it through a [`Pipeline`].
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    intr: CameraIntrinsics,
    pipeline: Pipeline,
    frame: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, cfg: PipelineConfig) -> Result<Self> {
        Self::with_intrinsics(scenario, cfg, scenario.intrinsics()?)
    }

    /// Same as [`Simulation::new`] but renders with `intr`, e.g. a rescaled
    /// camera for benchmarking.
    pub fn with_intrinsics(scenario: &'a Scenario, cfg: PipelineConfig, intr: CameraIntrinsics) -> Result<Self> {
        let pipeline = Pipeline::new(cfg, scenario.map.min.into(), scenario.map.max.into())?;
        Ok(Self { scenario, intr, pipeline, frame: 0 })
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intr
    }

    pub fn is_done(&self) -> bool {
        self.frame >= self.scenario.frame_count()
    }

    /// Depth image and pose of `frame` as the sensor sees them.
    pub fn render(&self, frame: usize) -> (DepthImage, Pose) {
        let s = self.scenario;
        let t = s.frame_time(frame);
        let pose = s.camera_pose(t);
        let img = render_depth(&s.world_boxes(t), &pose, &self.intr, &s.noise, s.seed, frame as u64);
        (img, pose)
    }

    pub fn step(&mut self) -> Result<Option<FrameRecord>> {
        if self.is_done() {
            return Ok(None);
        }
        let frame = self.frame;
        self.frame += 1;
        let s = self.scenario;
        let time = s.frame_time(frame);

        let t = Instant::now();
        let (img, pose) = self.render(frame);
        let render_ms = ms(t);

        let out = self
            .pipeline
            .process(frame as u64, &img, &pose)
            .map_err(|e| Error::Frame { frame, source: Box::new(e) })?;

        let ground_truth = s
            .agents
            .iter()
            .enumerate()
            .map(|(id, a)| {
                let st = a.state_at(time);
                GroundTruth { id, center: st.center.into(), size: a.size, velocity: st.velocity.into() }
            })
            .collect();
        let detections = out
            .detections
            .iter()
            .map(|d| DetectionRecord { center: d.bx.center.into(), size: d.bx.size.into(), refined: d.refined })
            .collect();
        let tracks = self
            .pipeline
            .tracker()
            .tracks()
            .iter()
            .map(|t| TrackRecord {
                id: t.id,
                center: t.bx.center.into(),
                size: t.bx.size.into(),
                velocity: t.velocity().into(),
                label: t.label,
                continuity: t.continuity,
                missed: t.missed,
                size_locked: t.locked_size.is_some(),
            })
            .collect();
        Ok(Some(FrameRecord {
            frame,
            time,
            ground_truth,
            detections,
            tracks,
            predictions: out.predictions,
            timings: Timings { render_ms, ..out.timings },
        }))
    }
}

/// Runs every frame of `scenario`.
pub fn run_scenario(scenario: &Scenario, cfg: &PipelineConfig) -> Result<Vec<FrameRecord>> {
    let mut sim = Simulation::new(scenario, cfg.clone())?;
    let mut out = Vec::with_capacity(scenario.frame_count());
    while let Some(r) = sim.step()? {
        out.push(r);
    }
    Ok(out)
}
