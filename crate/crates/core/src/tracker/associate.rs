use crate::geometry::{top_view_overlap_area, ObstacleBox};

/// Result of matching detections to existing track boxes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Association {
    /// `(detection index, track index)` pairs in the order they were accepted.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
}

/// Overlap ratio of a detection against a track box, normalized by the
/// detection's footprint.
pub fn overlap_ratio(det: &ObstacleBox, track: &ObstacleBox) -> f64 {
    let area = det.footprint_area();
    if area <= 0.0 {
        return 0.0;
    }
    top_view_overlap_area(det, track) / area
}

pub fn center_distance(a: &ObstacleBox, b: &ObstacleBox) -> f64 {
    (a.center - b.center).norm()
}

/// Greedy matching in ascending center distance. A pair is admissible when
/// its center distance is at most `max_center_distance` and its overlap
/// ratio is at least `overlap_ratio_min`. Ties break on detection index,
/// then track index.
pub fn associate(
    detections: &[ObstacleBox],
    tracks: &[ObstacleBox],
    max_center_distance: f64,
    overlap_ratio_min: f64,
) -> Association {
    let mut pairs = Vec::new();
    for (i, d) in detections.iter().enumerate() {
        for (j, t) in tracks.iter().enumerate() {
            let dist = center_distance(d, t);
            if dist <= max_center_distance && overlap_ratio(d, t) >= overlap_ratio_min {
                pairs.push((dist, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; detections.len()];
    let mut trk_used = vec![false; tracks.len()];
    let mut out = Association::default();
    for (_, i, j) in pairs {
        if !det_used[i] && !trk_used[j] {
            det_used[i] = true;
            trk_used[j] = true;
            out.matches.push((i, j));
        }
    }
    out.unmatched_detections = (0..detections.len()).filter(|&i| !det_used[i]).collect();
    out.unmatched_tracks = (0..tracks.len()).filter(|&j| !trk_used[j]).collect();
    out
}
