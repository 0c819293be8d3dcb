use std::fmt::Write as _;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::records::FrameRecord;
use crate::tracker::Label;

pub const METRICS_HEADER: &str = "# dynmap-metrics v1";
pub const RUNTIME_HEADER: &str = "# dynmap-runtime v1";

/// Distance within which a track is matched to a ground-truth agent.
pub const MATCH_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    /// Agent-frames whose nearest track is labeled dynamic.
    pub dynamic_as_dynamic: usize,
    /// Agent-frames whose nearest track is labeled static.
    pub dynamic_as_static: usize,
    /// Agent-frames with no track within the match distance.
    pub dynamic_untracked: usize,
    /// Track-frames labeled dynamic with no agent within the match distance.
    pub static_as_dynamic: usize,
    /// Track-frames labeled static with no agent within the match distance.
    pub static_as_static: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RuntimeReport {
    pub detection_ms: f64,
    pub tracking_ms: f64,
    pub prediction_ms: f64,
    /// Rendering is reported but excluded from the total and portions.
    pub render_ms: f64,
}

impl RuntimeReport {
    pub fn total_ms(&self) -> f64 {
        self.detection_ms + self.tracking_ms + self.prediction_ms
    }

    /// Percent of the total for detection, tracking and prediction.
    pub fn portions(&self) -> [f64; 3] {
        let total = self.total_ms();
        if total <= 0.0 {
            return [0.0; 3];
        }
        [self.detection_ms, self.tracking_ms, self.prediction_ms].map(|v| 100.0 * v / total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: usize,
    /// Dynamic-track samples matched to an agent.
    pub matched: usize,
    pub position_rmse: f64,
    pub position_mean: f64,
    pub velocity_rmse: f64,
    pub velocity_mean: f64,
    pub predictions: usize,
    pub failed_predictions: usize,
    pub failure_ratio: f64,
    pub confusion: Confusion,
    pub runtime: RuntimeReport,
}

fn rmse_and_mean(errors: &mut [f64]) -> (f64, f64) {
    if errors.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    // sorted sums make the result independent of track order
    errors.sort_by(f64::total_cmp);
    let n = errors.len() as f64;
    let sq: f64 = errors.iter().map(|e| e * e).sum();
    let sum: f64 = errors.iter().sum();
    ((sq / n).sqrt(), sum / n)
}

fn xy(p: &[f64; 3]) -> Vector2<f64> {
    Vector2::new(p[0], p[1])
}

/// Scores a record stream against its ground truth.
///
/// Each dynamic-labeled track is matched per frame to the nearest agent
/// within [`MATCH_DISTANCE`] in x-y. Position error is the x-y center
/// distance; velocity error is the norm of the x-y velocity difference.
pub fn evaluate(records: &[FrameRecord]) -> MetricsReport {
    let mut pos = Vec::new();
    let mut vel = Vec::new();
    let mut confusion = Confusion::default();
    let (mut predictions, mut failed) = (0usize, 0usize);
    let mut runtime = RuntimeReport::default();

    for r in records {
        let nearest_agent = |c: &[f64; 3]| {
            r.ground_truth
                .iter()
                .map(|g| (g, (xy(&g.center) - xy(c)).norm()))
                .filter(|&(_, d)| d <= MATCH_DISTANCE)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)))
        };
        for t in &r.tracks {
            match (nearest_agent(&t.center), t.label) {
                (Some((g, d)), Label::Dynamic) => {
                    pos.push(d);
                    vel.push((xy_vel(&t.velocity) - xy_vel(&g.velocity)).norm());
                }
                (None, Label::Dynamic) => confusion.static_as_dynamic += 1,
                (None, Label::Static) => confusion.static_as_static += 1,
                (Some(_), Label::Static) => {}
            }
        }
        for g in &r.ground_truth {
            let nearest = r
                .tracks
                .iter()
                .map(|t| (t, (xy(&g.center) - xy(&t.center)).norm()))
                .filter(|&(_, d)| d <= MATCH_DISTANCE)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)));
            match nearest {
                Some((t, _)) if t.label == Label::Dynamic => confusion.dynamic_as_dynamic += 1,
                Some(_) => confusion.dynamic_as_static += 1,
                None => confusion.dynamic_untracked += 1,
            }
        }
        predictions += r.predictions.len();
        failed += r.predictions.iter().filter(|p| !p.success).count();
        runtime.detection_ms += r.timings.detection_ms;
        runtime.tracking_ms += r.timings.tracking_ms;
        runtime.prediction_ms += r.timings.prediction_ms;
        runtime.render_ms += r.timings.render_ms;
    }

    let n = records.len().max(1) as f64;
    runtime.detection_ms /= n;
    runtime.tracking_ms /= n;
    runtime.prediction_ms /= n;
    runtime.render_ms /= n;
    let matched = pos.len();
    let (position_rmse, position_mean) = rmse_and_mean(&mut pos);
    let (velocity_rmse, velocity_mean) = rmse_and_mean(&mut vel);
    MetricsReport {
        frames: records.len(),
        matched,
        position_rmse,
        position_mean,
        velocity_rmse,
        velocity_mean,
        predictions,
        failed_predictions: failed,
        failure_ratio: if predictions == 0 { 0.0 } else { failed as f64 / predictions as f64 },
        confusion,
        runtime,
    }
}

fn xy_vel(v: &[f64; 2]) -> Vector2<f64> {
    Vector2::new(v[0], v[1])
}

impl MetricsReport {
    /// Deterministic metrics only; wall-clock numbers go to [`Self::runtime_csv`].
    pub fn to_csv(&self) -> String {
        let c = &self.confusion;
        let mut out = format!("{METRICS_HEADER}\nmetric,value\n");
        let ints = [
            ("frames", self.frames),
            ("matched_samples", self.matched),
            ("predictions", self.predictions),
            ("failed_predictions", self.failed_predictions),
        ];
        let floats = [
            ("position_rmse_m", self.position_rmse),
            ("position_mean_m", self.position_mean),
            ("velocity_rmse_mps", self.velocity_rmse),
            ("velocity_mean_mps", self.velocity_mean),
            ("failure_ratio", self.failure_ratio),
        ];
        for (k, v) in ints {
            writeln!(out, "{k},{v}").unwrap();
        }
        for (k, v) in floats {
            writeln!(out, "{k},{v:.6}").unwrap();
        }
        for (k, v) in [
            ("dynamic_as_dynamic", c.dynamic_as_dynamic),
            ("dynamic_as_static", c.dynamic_as_static),
            ("dynamic_untracked", c.dynamic_untracked),
            ("static_as_dynamic", c.static_as_dynamic),
            ("static_as_static", c.static_as_static),
        ] {
            writeln!(out, "{k},{v}").unwrap();
        }
        out
    }

    pub fn runtime_csv(&self) -> String {
        let r = &self.runtime;
        let [pd, pt, pp] = r.portions();
        let mut out = format!("{RUNTIME_HEADER}\nmodule,mean_ms,portion_pct\n");
        writeln!(out, "region_proposal_detection,{:.6},{pd:.6}", r.detection_ms).unwrap();
        writeln!(out, "identification_tracking,{:.6},{pt:.6}", r.tracking_ms).unwrap();
        writeln!(out, "trajectory_prediction,{:.6},{pp:.6}", r.prediction_ms).unwrap();
        writeln!(out, "system_total,{:.6},{:.6}", r.total_ms(), pd + pt + pp).unwrap();
        writeln!(out, "render_excluded,{:.6},", r.render_ms).unwrap();
        out
    }

    pub fn summary(&self) -> String {
        let r = &self.runtime;
        let [pd, pt, pp] = r.portions();
        let c = &self.confusion;
        format!(
            "frames: {}\n\
             dynamic-track samples: {}\n\
             position error: rmse {:.3} m, mean {:.3} m\n\
             velocity error: rmse {:.3} m/s, mean {:.3} m/s\n\
             predictions: {} ({} failed, ratio {:.3})\n\
             agents: {} dynamic, {} static, {} untracked; static tracks: {} static, {} dynamic\n\
             runtime per frame: detection {:.2} ms ({:.1}%), tracking {:.2} ms ({:.1}%), prediction {:.2} ms ({:.1}%), total {:.2} ms; render {:.2} ms\n",
            self.frames,
            self.matched,
            self.position_rmse,
            self.position_mean,
            self.velocity_rmse,
            self.velocity_mean,
            self.predictions,
            self.failed_predictions,
            self.failure_ratio,
            c.dynamic_as_dynamic,
            c.dynamic_as_static,
            c.dynamic_untracked,
            c.static_as_static,
            c.static_as_dynamic,
            r.detection_ms,
            pd,
            r.tracking_ms,
            pt,
            r.prediction_ms,
            pp,
            r.total_ms(),
            r.render_ms,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::records::{GroundTruth, PredictionRecord, PredictorKind, Timings, TrackRecord};

    fn gt(id: usize, x: f64, vx: f64) -> GroundTruth {
        GroundTruth { id, center: [x, 0.0, 0.85], size: [0.3, 0.3, 1.7], velocity: [vx, 0.0] }
    }

    fn track(id: u64, x: f64, vx: f64, label: Label) -> TrackRecord {
        TrackRecord {
            id,
            center: [x, 0.0, 0.85],
            size: [0.3, 0.3, 1.7],
            velocity: [vx, 0.0],
            label,
            continuity: None,
            missed: 0,
            size_locked: false,
        }
    }

    fn pred(success: bool) -> PredictionRecord {
        PredictionRecord {
            track_id: 0,
            method: PredictorKind::Markov,
            chosen: Some(2),
            probs: vec![],
            points: vec![],
            success,
            reset: false,
        }
    }

    fn frame(i: usize, ground_truth: Vec<GroundTruth>, tracks: Vec<TrackRecord>, predictions: Vec<PredictionRecord>) -> FrameRecord {
        FrameRecord {
            frame: i,
            time: i as f64 / 30.0,
            ground_truth,
            detections: vec![],
            tracks,
            predictions,
            timings: Timings { render_ms: 5.0, detection_ms: 8.0, tracking_ms: 1.0, prediction_ms: 1.0 },
        }
    }

    #[test]
    fn perfect_tracks_score_zero() {
        let recs: Vec<_> = (0..10)
            .map(|i| frame(i, vec![gt(0, i as f64 * 0.1, 1.0)], vec![track(0, i as f64 * 0.1, 1.0, Label::Dynamic)], vec![]))
            .collect();
        let m = evaluate(&recs);
        assert_eq!((m.position_rmse, m.velocity_rmse, m.matched), (0.0, 0.0, 10));
        assert_eq!(m.confusion.dynamic_as_dynamic, 10);
    }

    #[test]
    fn constant_offset_gives_that_mean_error() {
        let recs: Vec<_> = (0..10)
            .map(|i| frame(i, vec![gt(0, i as f64, 1.0)], vec![track(0, i as f64 + 0.1, 1.0, Label::Dynamic)], vec![]))
            .collect();
        let m = evaluate(&recs);
        assert!((m.position_mean - 0.1).abs() < 1e-12);
        assert!((m.position_rmse - 0.1).abs() < 1e-12);
    }

    #[test]
    fn failure_ratio_counts_failed_predictions() {
        let recs: Vec<_> = (0..10)
            .map(|i| frame(i, vec![], vec![], vec![pred(!(i == 2 || i == 5 || i == 7))]))
            .collect();
        let m = evaluate(&recs);
        assert_eq!((m.predictions, m.failed_predictions), (10, 3));
        assert!((m.failure_ratio - 0.3).abs() < 1e-12);
    }

    #[test]
    fn runtime_portions_sum_to_hundred() {
        let m = evaluate(&[frame(0, vec![], vec![], vec![])]);
        let p = m.runtime.portions();
        assert!((p.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        assert!((p[0] - 80.0).abs() < 1e-9);
        assert!(m.runtime_csv().starts_with(RUNTIME_HEADER));
        assert!(!m.to_csv().contains("_ms"));
    }

    #[test]
    fn permuting_track_ids_does_not_change_metrics() {
        let a = frame(
            0,
            vec![gt(0, 0.0, 1.0), gt(1, 5.0, -1.0)],
            vec![track(0, 0.13, 0.9, Label::Dynamic), track(1, 5.2, -1.3, Label::Dynamic), track(2, 9.0, 0.0, Label::Static)],
            vec![],
        );
        let mut b = a.clone();
        b.tracks.reverse();
        for (t, id) in b.tracks.iter_mut().zip([7, 3, 5]) {
            t.id = id;
        }
        assert_eq!(evaluate(&[a]).to_csv(), evaluate(&[b]).to_csv());
    }

    #[test]
    fn static_confusions() {
        let r = frame(0, vec![gt(0, 0.0, 1.0)], vec![track(0, 0.2, 1.0, Label::Static), track(1, 4.0, 0.0, Label::Dynamic)], vec![]);
        let c = evaluate(&[r]).confusion;
        assert_eq!((c.dynamic_as_static, c.static_as_dynamic), (1, 1));
    }
}
