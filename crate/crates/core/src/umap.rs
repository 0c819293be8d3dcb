//! Region proposals from the U-map: per-column depth histograms of the depth
//! image, thresholded and grouped into connected blobs, then lifted back to
//! 3D boxes in the map frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    back_project, transform_box_camera_to_map, DepthImage, Frame, ImageBox, ObstacleBox, Pose,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Meters per depth bin.
    pub bin_width: f64,
    /// Minimum histogram count for a cell to count as obstacle support.
    pub count_threshold: u32,
    pub min_box_cols: usize,
    pub min_box_bins: usize,
    /// Slack around the blob's depth range when scanning rows for height.
    pub height_depth_tolerance: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            bin_width: 0.2,
            count_threshold: 10,
            min_box_cols: 3,
            min_box_bins: 1,
            height_depth_tolerance: 0.2,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.height_depth_tolerance > 0.0) {
            return Err(Error::config("detector bin_width and height_depth_tolerance must be > 0"));
        }
        if self.count_threshold == 0 || self.min_box_cols == 0 || self.min_box_bins == 0 {
            return Err(Error::config("detector thresholds must be > 0"));
        }
        Ok(())
    }
}

/// Column depth histograms. Cell `(bin, col)` counts the pixels of column
/// `col` whose depth falls into bin `bin`.
#[derive(Debug, Clone, PartialEq)]
pub struct UMap {
    counts: Vec<u32>,
    n_bins: usize,
    cols: usize,
    bin_width: f64,
    depth_min: f64,
}

impl UMap {
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    #[inline]
    pub fn count(&self, bin: usize, col: usize) -> u32 {
        self.counts[bin * self.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn column_total(&self, col: usize) -> u32 {
        (0..self.n_bins).map(|b| self.count(b, col)).sum()
    }

    /// Near edge of `bin` in meters.
    pub fn bin_start(&self, bin: usize) -> f64 {
        self.depth_min + bin as f64 * self.bin_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UMapBox {
    pub col_min: usize,
    pub col_max: usize,
    pub bin_min: usize,
    pub bin_max: usize,
    pub peak: u32,
}

pub fn compute_umap(img: &DepthImage, cfg: &DetectorConfig) -> UMap {
    let intr = img.intrinsics();
    let n_bins = (((intr.depth_max - intr.depth_min) / cfg.bin_width).ceil() as usize).max(1);
    let cols = intr.width;
    let mut counts = vec![0u32; n_bins * cols];
    let inv = 1.0 / cfg.bin_width;
    for v in 0..intr.height {
        for (u, &d) in img.row(v).iter().enumerate() {
            if d > 0.0 {
                let b = (((f64::from(d) - intr.depth_min) * inv) as usize).min(n_bins - 1);
                counts[b * cols + u] += 1;
            }
        }
    }
    UMap {
        counts,
        n_bins,
        cols,
        bin_width: cfg.bin_width,
        depth_min: intr.depth_min,
    }
}

/// Bounding boxes of the 4-connected groups of cells at or above the count
/// threshold, ordered by `(col_min, bin_min)`.
pub fn extract_umap_boxes(umap: &UMap, cfg: &DetectorConfig) -> Vec<UMapBox> {
    let (rows, cols) = (umap.n_bins, umap.cols);
    let hot = |i: usize| umap.counts[i] >= cfg.count_threshold;
    let mut seen = vec![false; rows * cols];
    let mut stack = Vec::new();
    let mut boxes = Vec::new();

    for start in 0..rows * cols {
        if seen[start] || !hot(start) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut bx = UMapBox {
            col_min: usize::MAX,
            col_max: 0,
            bin_min: usize::MAX,
            bin_max: 0,
            peak: 0,
        };
        while let Some(i) = stack.pop() {
            let (b, c) = (i / cols, i % cols);
            bx.col_min = bx.col_min.min(c);
            bx.col_max = bx.col_max.max(c);
            bx.bin_min = bx.bin_min.min(b);
            bx.bin_max = bx.bin_max.max(b);
            bx.peak = bx.peak.max(umap.counts[i]);
            let mut visit = |j: usize| {
                if !seen[j] && hot(j) {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < cols {
                visit(i + 1);
            }
            if b > 0 {
                visit(i - cols);
            }
            if b + 1 < rows {
                visit(i + cols);
            }
        }
        if bx.col_max - bx.col_min + 1 >= cfg.min_box_cols
            && bx.bin_max - bx.bin_min + 1 >= cfg.min_box_bins
        {
            boxes.push(bx);
        }
    }
    boxes.sort_by_key(|b| (b.col_min, b.bin_min));
    boxes
}

/// Recovers the row extent of a U-map blob by scanning its columns for pixels
/// near the blob's depth range. `None` when no pixel qualifies.
pub fn extract_image_box(img: &DepthImage, ubox: &UMapBox, cfg: &DetectorConfig) -> Option<ImageBox> {
    let intr = img.intrinsics();
    let lo = intr.depth_min + ubox.bin_min as f64 * cfg.bin_width - cfg.height_depth_tolerance;
    let hi = intr.depth_min + (ubox.bin_max + 1) as f64 * cfg.bin_width + cfg.height_depth_tolerance;
    let col_max = ubox.col_max.min(img.width().saturating_sub(1));
    if ubox.col_min > col_max {
        return None;
    }
    let mut row_min = usize::MAX;
    let mut row_max = 0;
    for v in 0..img.height() {
        let row = &img.row(v)[ubox.col_min..=col_max];
        let hit = row.iter().any(|&d| {
            let d = f64::from(d);
            d > 0.0 && d >= lo && d <= hi
        });
        if hit {
            row_min = row_min.min(v);
            row_max = v;
        }
    }
    (row_min != usize::MAX).then(|| ImageBox {
        col_min: ubox.col_min,
        col_max,
        row_min,
        row_max,
        depth: intr.depth_min + (ubox.bin_min + ubox.bin_max + 1) as f64 / 2.0 * cfg.bin_width,
    })
}

/// Lifts an image box to a camera-frame box at the image box's depth; the
/// box length along the optical axis is the blob's depth-bin extent.
pub fn image_box_to_camera(
    ibox: &ImageBox,
    ubox: &UMapBox,
    img: &DepthImage,
    cfg: &DetectorConfig,
) -> ObstacleBox {
    let intr = img.intrinsics();
    let d = ibox.depth;
    let tl = back_project(ibox.col_min as f64 - 0.5, ibox.row_min as f64 - 0.5, d, intr);
    let br = back_project(ibox.col_max as f64 + 0.5, ibox.row_max as f64 + 0.5, d, intr);
    let length = (ubox.bin_max - ubox.bin_min + 1) as f64 * cfg.bin_width;
    let center = (tl + br) / 2.0;
    ObstacleBox {
        frame: Frame::Camera,
        center: nalgebra::Vector3::new(center.x, center.y, d),
        size: nalgebra::Vector3::new(br.x - tl.x, br.y - tl.y, length),
    }
}

/// Raw map-frame region proposals for one depth image.
pub fn detect_raw_boxes(img: &DepthImage, pose: &Pose, cfg: &DetectorConfig) -> Vec<ObstacleBox> {
    let umap = compute_umap(img, cfg);
    extract_umap_boxes(&umap, cfg)
        .iter()
        .filter_map(|ub| {
            let ib = extract_image_box(img, ub, cfg)?;
            let cam = image_box_to_camera(&ib, ub, img, cfg);
            transform_box_camera_to_map(&cam, pose).ok()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraIntrinsics;
    use proptest::prelude::*;

    fn intr(w: usize, h: usize) -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, w, h, 0.5, 10.0)
            .unwrap()
    }

    fn umap_from(grid: &[&[u32]]) -> UMap {
        UMap {
            counts: grid.iter().flat_map(|r| r.iter().copied()).collect(),
            n_bins: grid.len(),
            cols: grid[0].len(),
            bin_width: 0.2,
            depth_min: 0.5,
        }
    }

    /// Union-find labelling used as an independent grouping oracle.
    fn oracle_components(u: &UMap, thr: u32) -> Vec<(usize, usize, usize, usize)> {
        let n = u.n_bins * u.cols;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let hot = |b: usize, c: usize| u.count(b, c) >= thr;
        for b in 0..u.n_bins {
            for c in 0..u.cols {
                if !hot(b, c) {
                    continue;
                }
                if c + 1 < u.cols && hot(b, c + 1) {
                    let (x, y) = (find(&mut parent, b * u.cols + c), find(&mut parent, b * u.cols + c + 1));
                    parent[x] = y;
                }
                if b + 1 < u.n_bins && hot(b + 1, c) {
                    let (x, y) = (find(&mut parent, b * u.cols + c), find(&mut parent, (b + 1) * u.cols + c));
                    parent[x] = y;
                }
            }
        }
        let mut ext = std::collections::BTreeMap::new();
        for b in 0..u.n_bins {
            for c in 0..u.cols {
                if hot(b, c) {
                    let r = find(&mut parent, b * u.cols + c);
                    let e = ext.entry(r).or_insert((c, c, b, b));
                    e.0 = e.0.min(c);
                    e.1 = e.1.max(c);
                    e.2 = e.2.min(b);
                    e.3 = e.3.max(b);
                }
            }
        }
        let mut v: Vec<_> = ext.into_values().collect();
        v.sort_by_key(|e| (e.0, e.2));
        v
    }

    #[test]
    fn constant_image_fills_one_bin_per_column() {
        let i = intr(8, 6);
        let cfg = DetectorConfig::default();
        let d = (i.depth_min + 0.5 * cfg.bin_width) as f32;
        let img = DepthImage::new(i, vec![d; 48]).unwrap();
        let u = compute_umap(&img, &cfg);
        for c in 0..8 {
            assert_eq!(u.count(0, c), 6);
            assert_eq!(u.column_total(c), 6);
        }
        assert_eq!(u.total(), 48);
    }

    #[test]
    fn invalid_image_gives_zero_umap() {
        let img = DepthImage::empty(intr(8, 6));
        let u = compute_umap(&img, &DetectorConfig::default());
        assert_eq!(u.total(), 0);
        assert!(extract_umap_boxes(&u, &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn two_plateaus_hand_counted() {
        // left two columns at 1.0 m (bin 2), right two at 3.0 m (bin 12)
        let i = intr(4, 4);
        let row = [1.0f32, 1.0, 3.0, 3.0];
        let data: Vec<f32> = (0..4).flat_map(|_| row).collect();
        let img = DepthImage::new(i, data).unwrap();
        let u = compute_umap(&img, &DetectorConfig::default());
        assert_eq!(u.n_bins(), 48);
        for b in 0..u.n_bins() {
            for c in 0..4 {
                let expected = match (b, c) {
                    (2, 0 | 1) | (12, 2 | 3) => 4,
                    _ => 0,
                };
                assert_eq!(u.count(b, c), expected, "bin {b} col {c}");
            }
        }
    }

    #[test]
    fn single_block_gives_one_box() {
        let u = umap_from(&[
            &[0, 0, 0, 0, 0],
            &[0, 20, 30, 20, 0],
            &[0, 15, 40, 11, 0],
            &[0, 0, 0, 0, 0],
        ]);
        let boxes = extract_umap_boxes(&u, &DetectorConfig::default());
        assert_eq!(
            boxes,
            vec![UMapBox { col_min: 1, col_max: 3, bin_min: 1, bin_max: 2, peak: 40 }]
        );
    }

    #[test]
    fn sub_threshold_column_splits_blocks() {
        let u = umap_from(&[
            &[12, 12, 12, 9, 12, 12, 12],
            &[12, 12, 12, 9, 12, 12, 12],
        ]);
        let cfg = DetectorConfig::default();
        let boxes = extract_umap_boxes(&u, &cfg);
        let got: Vec<_> = boxes.iter().map(|b| (b.col_min, b.col_max, b.bin_min, b.bin_max)).collect();
        assert_eq!(got, oracle_components(&u, cfg.count_threshold));
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn small_components_discarded() {
        let u = umap_from(&[&[50, 50, 0, 50, 50, 50]]);
        let boxes = extract_umap_boxes(&u, &DetectorConfig::default());
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0].col_min, 3);
    }

    fn band_image(w: usize, h: usize, cols: std::ops::RangeInclusive<usize>, rows: std::ops::RangeInclusive<usize>, d: f32) -> DepthImage {
        let mut img = DepthImage::empty(intr(w, h));
        for v in rows {
            for u in cols.clone() {
                img.set_depth(u, v, d);
            }
        }
        img
    }

    #[test]
    fn image_box_full_height_band() {
        let img = band_image(40, 30, 10..=19, 0..=29, 3.05);
        let cfg = DetectorConfig::default();
        let ub = extract_umap_boxes(&compute_umap(&img, &cfg), &cfg)[0];
        let ib = extract_image_box(&img, &ub, &cfg).unwrap();
        assert_eq!((ib.col_min, ib.col_max, ib.row_min, ib.row_max), (10, 19, 0, 29));
    }

    #[test]
    fn image_box_partial_rows() {
        let img = band_image(40, 30, 10..=19, 10..=20, 3.05);
        let cfg = DetectorConfig::default();
        let ub = extract_umap_boxes(&compute_umap(&img, &cfg), &cfg)[0];
        let ib = extract_image_box(&img, &ub, &cfg).unwrap();
        // scan oracle: rows holding a pixel of the band
        let rows: Vec<usize> = (0..30).filter(|&v| (10..=19).any(|u| img.depth(u, v) > 0.0)).collect();
        assert_eq!((ib.row_min, ib.row_max), (rows[0], *rows.last().unwrap()));
        assert_eq!((ib.row_min, ib.row_max), (10, 20));
        assert_eq!(ib.center().y, 15.0);
        assert_eq!(ib.size(), nalgebra::Vector2::new(10.0, 11.0));
    }

    #[test]
    fn image_box_dropped_when_depth_disjoint() {
        let img = band_image(40, 30, 10..=19, 0..=29, 3.05);
        let cfg = DetectorConfig::default();
        let far = UMapBox { col_min: 10, col_max: 19, bin_min: 30, bin_max: 31, peak: 30 };
        assert!(extract_image_box(&img, &far, &cfg).is_none());
    }

    #[test]
    fn empty_scene_detects_nothing() {
        let img = DepthImage::empty(intr(64, 48));
        assert!(detect_raw_boxes(&img, &Pose::identity(), &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn one_meter_box_straight_ahead() {
        // analytic scene: 1 m wide, 1 m tall front face at 3 m on the axis
        let (w, h) = (161, 121);
        let i = CameraIntrinsics::new(100.0, 100.0, 80.0, 60.0, w, h, 0.5, 10.0).unwrap();
        let mut img = DepthImage::empty(i);
        for v in 0..h {
            for u in 0..w {
                let x = (u as f64 - i.cx) * 3.0 / i.fx;
                let y = (v as f64 - i.cy) * 3.0 / i.fy;
                if x.abs() <= 0.5 && y.abs() <= 0.5 {
                    img.set_depth(u, v, 3.0);
                }
            }
        }
        let cfg = DetectorConfig::default();
        let boxes = detect_raw_boxes(&img, &Pose::identity(), &cfg);
        assert_eq!(boxes.len(), 1);
        let b = boxes[0];
        let depth_quantum = cfg.bin_width;
        let pixel_quantum = 3.0 / i.fx;
        assert!(b.center.x.abs() < 1e-9 && b.center.y.abs() < 1e-9);
        assert!((b.center.z - 3.0).abs() <= depth_quantum);
        // width is scaled by the box depth (bin midpoint) over the true 3 m
        let scale = b.center.z / 3.0;
        assert!((b.size.x - 1.0).abs() <= pixel_quantum * scale + depth_quantum / 3.0 + 1e-9, "{}", b.size.x);
    }

    #[test]
    fn two_pillars_ordered_by_column() {
        let mut img = band_image(60, 40, 5..=12, 0..=39, 4.0);
        for v in 0..40 {
            for u in 40..=50 {
                img.set_depth(u, v, 4.0);
            }
        }
        let cfg = DetectorConfig::default();
        let boxes = detect_raw_boxes(&img, &Pose::identity(), &cfg);
        assert_eq!(boxes.len(), 2);
        assert!(boxes[0].center.x < boxes[1].center.x);
        let ub = extract_umap_boxes(&compute_umap(&img, &cfg), &cfg);
        let oracle = oracle_components(&compute_umap(&img, &cfg), cfg.count_threshold);
        assert_eq!(ub.len(), oracle.len());
    }

    proptest! {
        #[test]
        fn umap_total_equals_valid_pixels(data in prop::collection::vec(prop_oneof![Just(0.0f32), 0.5f32..10.0], 12 * 9)) {
            let img = DepthImage::new(intr(12, 9), data).unwrap();
            let u = compute_umap(&img, &DetectorConfig::default());
            prop_assert_eq!(u.total(), img.valid_count() as u64);
            for c in 0..12 {
                prop_assert!(u.column_total(c) <= 9);
            }
        }

        #[test]
        fn grouping_matches_union_find(cells in prop::collection::vec(0u32..25, 6 * 10)) {
            let rows: Vec<&[u32]> = cells.chunks(10).collect();
            let u = umap_from(&rows);
            let cfg = DetectorConfig { min_box_cols: 1, ..DetectorConfig::default() };
            let got: Vec<_> = extract_umap_boxes(&u, &cfg)
                .iter()
                .map(|b| (b.col_min, b.col_max, b.bin_min, b.bin_max))
                .collect();
            prop_assert_eq!(got, oracle_components(&u, cfg.count_threshold));
        }

        #[test]
        fn detection_is_deterministic(data in prop::collection::vec(prop_oneof![Just(0.0f32), 2.0f32..2.4], 16 * 12)) {
            let img = DepthImage::new(intr(16, 12), data).unwrap();
            let cfg = DetectorConfig { count_threshold: 3, ..DetectorConfig::default() };
            let a = detect_raw_boxes(&img, &Pose::identity(), &cfg);
            let b = detect_raw_boxes(&img, &Pose::identity(), &cfg);
            prop_assert_eq!(a, b);
        }
    }
}
