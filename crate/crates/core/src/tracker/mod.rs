//! Multi-obstacle tracking: greedy association, constant-velocity Kalman
//! filtering, box size locking and dynamic/static classification from a
//! continuity coefficient plus a vote buffer.

mod associate;
mod continuity;
mod kalman;

use std::collections::VecDeque;

use nalgebra::{Matrix4, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{box_fully_in_view, CameraIntrinsics, ObstacleBox, Pose};

pub use associate::{associate, center_distance, overlap_ratio, Association};
pub use continuity::continuity_coefficient;
pub use kalman::{kalman_predict, kalman_step, KalmanConfig, KalmanParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub overlap_ratio_min: f64,
    pub max_center_distance: f64,
    /// `k`: history length is `k + 1`; tracks unmatched for more than `k`
    /// frames are retired.
    pub history_len: usize,
    /// `k'`: consecutive fully visible frames before the box size locks.
    pub size_fix_frames: usize,
    /// `n`: frames spanned by each displacement vector.
    pub pair_span: usize,
    pub continuity_threshold: f64,
    pub vote_window: usize,
    pub vote_min: usize,
    pub dynamic_velocity_min: f64,
    /// Seconds per frame.
    pub dt: f64,
    /// Pixels a projected box must keep from the image border to count as
    /// fully visible.
    pub fully_visible_margin: f64,
    pub kalman: KalmanConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            overlap_ratio_min: 0.3,
            max_center_distance: 1.0,
            history_len: 6,
            size_fix_frames: 5,
            pair_span: 2,
            continuity_threshold: 0.5,
            vote_window: 5,
            vote_min: 3,
            dynamic_velocity_min: 0.3,
            dt: 1.0 / 30.0,
            fully_visible_margin: 2.0,
            kalman: KalmanConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.overlap_ratio_min > 0.0 && self.overlap_ratio_min <= 1.0) {
            return Err(Error::config("overlap_ratio_min must be in (0, 1]"));
        }
        if !(self.pair_span > 0 && self.pair_span < self.history_len) {
            return Err(Error::config("pair_span must satisfy 0 < n < k"));
        }
        if !(self.vote_min > 0 && self.vote_min <= self.vote_window) {
            return Err(Error::config("vote_min must satisfy 0 < T_c <= c"));
        }
        if !(self.dt > 0.0) || !(self.max_center_distance > 0.0) {
            return Err(Error::config("dt and max_center_distance must be > 0"));
        }
        if self.size_fix_frames == 0 {
            return Err(Error::config("size_fix_frames must be >= 1"));
        }
        self.kalman.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Static,
    Dynamic,
}

/// Pushes the temporary label for this frame and returns the voted label.
pub fn classify(votes: &mut VecDeque<Label>, c_con: f64, speed: f64, cfg: &TrackerConfig) -> Label {
    let temp = if speed >= cfg.dynamic_velocity_min && c_con >= cfg.continuity_threshold {
        Label::Dynamic
    } else {
        Label::Static
    };
    votes.push_back(temp);
    while votes.len() > cfg.vote_window {
        votes.pop_front();
    }
    if votes.iter().filter(|&&l| l == Label::Dynamic).count() >= cfg.vote_min {
        Label::Dynamic
    } else {
        Label::Static
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    /// Detection box as measured.
    pub bx: ObstacleBox,
    pub stamp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedObstacle {
    pub id: u64,
    /// `[x, y, vx, vy]` in the map frame.
    pub state: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    /// Reported box: filtered x/y, detected z, locked or detected size.
    pub bx: ObstacleBox,
    pub history: VecDeque<HistoryEntry>,
    pub locked_size: Option<Vector3<f64>>,
    pub frames_fully_visible: usize,
    visible_sizes: VecDeque<Vector3<f64>>,
    pub votes: VecDeque<Label>,
    pub label: Label,
    pub continuity: Option<f64>,
    /// Consecutive frames without a matching detection.
    pub missed: usize,
}

impl TrackedObstacle {
    fn spawn(id: u64, det: &ObstacleBox, stamp: u64, cfg: &TrackerConfig) -> Self {
        Self {
            id,
            state: Vector4::new(det.center.x, det.center.y, 0.0, 0.0),
            covariance: cfg.kalman.initial_covariance(),
            bx: *det,
            history: VecDeque::from([HistoryEntry { bx: *det, stamp }]),
            locked_size: None,
            frames_fully_visible: 0,
            visible_sizes: VecDeque::new(),
            votes: VecDeque::new(),
            label: Label::Static,
            continuity: None,
            missed: 0,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.state[0], self.state[1])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.state[2], self.state[3])
    }

    pub fn speed(&self) -> f64 {
        self.velocity().norm()
    }

    pub fn last_stamp(&self) -> u64 {
        self.history.back().expect("history is never empty").stamp
    }

    /// Updates the fully-visible run and locks the size once the run
    /// reaches `k'` frames.
    pub fn update_size_lock(&mut self, size: Vector3<f64>, fully_in_fov: bool, cfg: &TrackerConfig) {
        if !fully_in_fov {
            self.frames_fully_visible = 0;
            self.visible_sizes.clear();
            return;
        }
        self.frames_fully_visible += 1;
        self.visible_sizes.push_back(size);
        while self.visible_sizes.len() > cfg.size_fix_frames {
            self.visible_sizes.pop_front();
        }
        if self.locked_size.is_none() && self.frames_fully_visible >= cfg.size_fix_frames {
            let sum: Vector3<f64> = self.visible_sizes.iter().sum();
            self.locked_size = Some(sum / self.visible_sizes.len() as f64);
        }
    }

    fn refresh_box(&mut self, z: f64, size: Vector3<f64>) {
        let size = self.locked_size.unwrap_or(size);
        self.bx.center = Vector3::new(self.state[0], self.state[1], z);
        self.bx.size = size;
    }

    fn history_xy(&self) -> Vec<Vector2<f64>> {
        self.history.iter().map(|h| h.bx.center.xy()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub matched: Vec<u64>,
    pub spawned: Vec<u64>,
    pub retired: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<TrackedObstacle>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, tracks: Vec::new(), next_id: 0 })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live tracks ordered by id.
    pub fn tracks(&self) -> &[TrackedObstacle] {
        &self.tracks
    }

    pub fn track(&self, id: u64) -> Option<&TrackedObstacle> {
        self.tracks.iter().find(|t| t.id == id)
    }

    /// Processes the map-frame detections of frame `stamp`. When `view` is
    /// given it is used to decide whether each detection is fully visible.
    pub fn step(
        &mut self,
        stamp: u64,
        detections: &[ObstacleBox],
        view: Option<(&Pose, &CameraIntrinsics)>,
    ) -> Result<StepReport> {
        let cfg = self.cfg.clone();
        let k = cfg.history_len;
        let track_boxes: Vec<ObstacleBox> = self.tracks.iter().map(|t| t.bx).collect();
        let assoc = associate(detections, &track_boxes, cfg.max_center_distance, cfg.overlap_ratio_min);
        let visible = |b: &ObstacleBox| view.is_some_and(|(p, i)| box_fully_in_view(b, p, i, cfg.fully_visible_margin));
        let mut report = StepReport::default();

        for &(di, ti) in &assoc.matches {
            let det = &detections[di];
            let t = &mut self.tracks[ti];
            let last = *t.history.back().expect("history is never empty");
            if stamp <= last.stamp {
                return Err(Error::invalid(format!("frame stamp {stamp} is not after {}", last.stamp)));
            }
            let elapsed = (stamp - last.stamp) as f64 * cfg.dt;
            let vel = (det.center.xy() - last.bx.center.xy()) / elapsed;
            let z = Vector4::new(det.center.x, det.center.y, vel.x, vel.y);
            let params = cfg.kalman.params(elapsed);
            let (x, p) = kalman_step(&t.state, &t.covariance, &z, &params)?;
            t.state = x;
            t.covariance = p;
            t.history.push_back(HistoryEntry { bx: *det, stamp });
            while t.history.len() > k + 1 {
                t.history.pop_front();
            }
            t.missed = 0;
            t.update_size_lock(det.size, visible(det), &cfg);
            t.refresh_box(det.center.z, det.size);
            if t.history.len() == k + 1 {
                let c = continuity_coefficient(&t.history_xy(), cfg.pair_span);
                t.continuity = c;
                if let Some(c) = c {
                    let speed = t.speed();
                    t.label = classify(&mut t.votes, c, speed, &cfg);
                }
            }
            report.matched.push(t.id);
        }

        let params = cfg.kalman.params(cfg.dt);
        for &ti in &assoc.unmatched_tracks {
            let t = &mut self.tracks[ti];
            t.missed += 1;
            let (x, p) = kalman_predict(&t.state, &t.covariance, &params);
            t.state = x;
            t.covariance = p;
            t.update_size_lock(t.bx.size, false, &cfg);
            let (z, size) = (t.bx.center.z, t.bx.size);
            t.refresh_box(z, size);
        }
        self.tracks.retain(|t| {
            let keep = t.missed <= k;
            if !keep {
                report.retired.push(t.id);
            }
            keep
        });

        for &di in &assoc.unmatched_detections {
            let det = &detections[di];
            let mut t = TrackedObstacle::spawn(self.next_id, det, stamp, &cfg);
            t.update_size_lock(det.size, visible(det), &cfg);
            t.refresh_box(det.center.z, det.size);
            report.spawned.push(t.id);
            self.next_id += 1;
            self.tracks.push(t);
        }
        Ok(report)
    }
}
