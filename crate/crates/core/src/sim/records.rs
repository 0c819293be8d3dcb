use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracker::Label;

pub const RECORDS_FORMAT: &str = "dynmap-records/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    #[default]
    Markov,
    Linear,
}

impl std::fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PredictorKind::Markov => "markov",
            PredictorKind::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub id: usize,
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub id: u64,
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub velocity: [f64; 2],
    pub label: Label,
    pub continuity: Option<f64>,
    pub missed: usize,
    pub size_locked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub track_id: u64,
    pub method: PredictorKind,
    /// Library index of the chosen path (Markov only).
    pub chosen: Option<usize>,
    pub probs: Vec<f64>,
    pub points: Vec<[f64; 3]>,
    pub success: bool,
    pub reset: bool,
}

/// Wall-clock milliseconds per pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub render_ms: f64,
    pub detection_ms: f64,
    pub tracking_ms: f64,
    pub prediction_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub time: f64,
    pub ground_truth: Vec<GroundTruth>,
    pub detections: Vec<DetectionRecord>,
    pub tracks: Vec<TrackRecord>,
    pub predictions: Vec<PredictionRecord>,
    pub timings: Timings,
}

impl FrameRecord {
    /// Equality of everything except the wall-clock timings.
    pub fn eq_ignoring_timing(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self { timings: Timings::default(), ..r.clone() };
        strip(self) == strip(other)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsHeader {
    pub format: String,
    pub scenario: String,
    pub seed: u64,
    pub predictor: PredictorKind,
}

impl RecordsHeader {
    pub fn new(scenario: &str, seed: u64, predictor: PredictorKind) -> Self {
        Self { format: RECORDS_FORMAT.into(), scenario: scenario.into(), seed, predictor }
    }
}

/// JSON Lines: a header object, then one record per frame.
pub fn write_records(path: &Path, header: &RecordsHeader, records: &[FrameRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| Error::io(path, e);
    serde_json::to_writer(&mut w, header).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(io)?;
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_records(path: &Path) -> Result<(RecordsHeader, Vec<FrameRecord>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::format("records", "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    let header: RecordsHeader =
        serde_json::from_str(&first).map_err(|e| Error::format("records", format!("header: {e}")))?;
    if header.format != RECORDS_FORMAT {
        return Err(Error::format("records", format!("unsupported format {}", header.format)));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::format("records", format!("line {}: {e}", n + 2)))?);
    }
    Ok((header, out))
}
