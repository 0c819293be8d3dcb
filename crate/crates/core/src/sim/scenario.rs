use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Frame, ObstacleBox, Pose};

pub const SCENARIO_FORMAT: &str = "dynmap-scenario/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub depth_min: f64,
    pub depth_max: f64,
    /// Rows of `[t, x, y, z, yaw_deg, pitch_deg]`, linearly interpolated.
    pub trajectory: Vec<[f64; 6]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Constant part of the depth noise standard deviation, meters.
    pub sigma0: f64,
    /// Quadratic part, `sigma = sigma0 + sigma1 d^2`, 1/m.
    pub sigma1: f64,
    /// Probability that a pixel drops out to invalid.
    pub dropout: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma0: 0.01, sigma1: 0.0019, dropout: 0.02 }
    }
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { sigma0: 0.0, sigma1: 0.0, dropout: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl StaticBox {
    pub fn to_box(&self) -> Result<ObstacleBox> {
        ObstacleBox::from_min_max(Frame::Map, self.min.into(), self.max.into())
    }
}

/// Circular arc replacing the straight leg from waypoint `from` to `from + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSpec {
    pub from: usize,
    /// Signed turn over the leg, degrees; positive turns left.
    pub sweep_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agent {
    pub size: [f64; 3],
    /// Rows of `[t, x, y]`; the agent stands on z = 0 and holds its first
    /// and last positions outside the scripted time span.
    pub waypoints: Vec<[f64; 3]>,
    #[serde(default)]
    pub arcs: Vec<ArcSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub center: Vector3<f64>,
    pub velocity: Vector2<f64>,
}

impl Agent {
    fn validate(&self, i: usize) -> Result<()> {
        if self.size.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid(format!("agent {i}: size must be positive")));
        }
        if self.waypoints.is_empty() {
            return Err(Error::invalid(format!("agent {i}: needs at least one waypoint")));
        }
        if self.waypoints.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(Error::invalid(format!("agent {i}: waypoint times must increase")));
        }
        for a in &self.arcs {
            if a.from + 1 >= self.waypoints.len() {
                return Err(Error::invalid(format!("agent {i}: arc leg {} has no end waypoint", a.from)));
            }
            if !(a.sweep_deg != 0.0 && a.sweep_deg.abs() < 360.0) {
                return Err(Error::invalid(format!("agent {i}: arc sweep must be nonzero and below 360 degrees")));
            }
        }
        Ok(())
    }

    pub fn state_at(&self, t: f64) -> AgentState {
        let wp = &self.waypoints;
        let z = self.size[2] / 2.0;
        let at = |p: Vector2<f64>, v: Vector2<f64>| AgentState { center: Vector3::new(p.x, p.y, z), velocity: v };
        let first = wp[0];
        let last = wp[wp.len() - 1];
        if wp.len() == 1 || t <= first[0] {
            return at(Vector2::new(first[1], first[2]), Vector2::zeros());
        }
        if t >= last[0] {
            return at(Vector2::new(last[1], last[2]), Vector2::zeros());
        }
        let i = wp.windows(2).position(|w| t < w[1][0]).expect("t inside the scripted span");
        let (w0, w1) = (wp[i], wp[i + 1]);
        let (a, b) = (Vector2::new(w0[1], w0[2]), Vector2::new(w1[1], w1[2]));
        let dur = w1[0] - w0[0];
        let u = (t - w0[0]) / dur;
        match self.arcs.iter().find(|arc| arc.from == i) {
            None => at(a + (b - a) * u, (b - a) / dur),
            Some(arc) => {
                let theta = arc.sweep_deg.to_radians();
                let chord = b - a;
                let c = chord.norm();
                let r = c / (2.0 * (theta.abs() / 2.0).sin());
                let left = Vector2::new(-chord.y, chord.x) / c;
                let center = (a + b) / 2.0 + left * (theta.signum() * r * (theta / 2.0).cos());
                let phi0 = (a.y - center.y).atan2(a.x - center.x);
                let phi = phi0 + theta * u;
                let p = center + Vector2::new(phi.cos(), phi.sin()) * r;
                let v = Vector2::new(-phi.sin(), phi.cos()) * (r * theta / dur);
                at(p, v)
            }
        }
    }

    pub fn box_at(&self, t: f64) -> ObstacleBox {
        ObstacleBox::new(Frame::Map, self.state_at(t).center, self.size.into()).expect("validated size")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format: String,
    #[serde(default)]
    pub name: String,
    pub frame_rate: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    pub camera: CameraSpec,
    #[serde(default)]
    pub noise: NoiseModel,
    pub map: MapBounds,
    #[serde(default, rename = "static_box")]
    pub static_boxes: Vec<StaticBox>,
    #[serde(default, rename = "agent")]
    pub agents: Vec<Agent>,
    #[serde(default)]
    pub pipeline: toml::Table,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::format("scenario", e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("scenario", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != SCENARIO_FORMAT {
            return Err(Error::format("scenario", format!("expected format \"{SCENARIO_FORMAT}\", got \"{}\"", self.format)));
        }
        if !(self.frame_rate > 0.0 && self.duration > 0.0) {
            return Err(Error::invalid("frame_rate and duration must be > 0"));
        }
        self.intrinsics()?;
        let traj = &self.camera.trajectory;
        if traj.is_empty() || traj.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(Error::invalid("camera trajectory needs strictly increasing timestamps"));
        }
        for (i, b) in self.static_boxes.iter().enumerate() {
            b.to_box().map_err(|_| Error::invalid(format!("static box {i} must have max > min")))?;
        }
        for (i, a) in self.agents.iter().enumerate() {
            a.validate(i)?;
        }
        if (0..3).any(|a| !(self.map.max[a] > self.map.min[a])) {
            return Err(Error::invalid("map bounds must have max > min"));
        }
        let n = self.noise;
        if !(n.sigma0 >= 0.0 && n.sigma1 >= 0.0 && (0.0..1.0).contains(&n.dropout)) {
            return Err(Error::invalid("noise sigmas must be >= 0 and dropout in [0, 1)"));
        }
        self.pipeline_config(None)?;
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        let c = &self.camera;
        CameraIntrinsics::from_fov(c.width, c.height, c.hfov_deg, c.vfov_deg, c.depth_min, c.depth_max)
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }

    pub fn frame_time(&self, frame: usize) -> f64 {
        frame as f64 / self.frame_rate
    }

    pub fn camera_pose(&self, t: f64) -> Pose {
        let traj = &self.camera.trajectory;
        let row = if t <= traj[0][0] {
            traj[0]
        } else if t >= traj[traj.len() - 1][0] {
            traj[traj.len() - 1]
        } else {
            let i = traj.windows(2).position(|w| t < w[1][0]).expect("t inside trajectory");
            let (a, b) = (traj[i], traj[i + 1]);
            let u = (t - a[0]) / (b[0] - a[0]);
            std::array::from_fn(|k| a[k] + (b[k] - a[k]) * u)
        };
        Pose::looking(Vector3::new(row[1], row[2], row[3]), row[4].to_radians(), row[5].to_radians())
    }

    /// All boxes present at time `t`: static geometry then agents.
    pub fn world_boxes(&self, t: f64) -> Vec<ObstacleBox> {
        let mut out: Vec<ObstacleBox> = self.static_boxes.iter().map(|b| b.to_box().expect("validated")).collect();
        out.extend(self.agents.iter().map(|a| a.box_at(t)));
        out
    }

    /// Pipeline settings from the scenario, with `overrides` (same layout as
    /// the `[pipeline]` table) merged on top.
    pub fn pipeline_config(&self, overrides: Option<&toml::Table>) -> Result<PipelineConfig> {
        let mut table = self.pipeline.clone();
        if let Some(o) = overrides {
            merge(&mut table, o);
        }
        let mut cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::format("pipeline config", e.to_string()))?;
        cfg.tracker.dt = 1.0 / self.frame_rate;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Reads a pipeline override file (the `[pipeline]` layout at top level).
pub fn load_overrides(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.parse::<toml::Table>().map_err(|e| Error::format("pipeline config", e.to_string()))
}
