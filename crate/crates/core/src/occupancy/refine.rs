use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{CleanHistory, OccupancyGrid};
use crate::error::{Error, Result};
use crate::geometry::{Frame, ObstacleBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Per-axis inflation applied to a raw box before searching the map.
    pub c_inflate: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { c_inflate: 1.3 }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_inflate >= 1.0) {
            return Err(Error::config("c_inflate must be >= 1"));
        }
        Ok(())
    }
}

/// Inclusive voxel index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelRange {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub bx: ObstacleBox,
    /// False when no qualifying voxel was found and `bx` is the raw box.
    pub refined: bool,
    pub voxels: Option<VoxelRange>,
}

/// Shrinks a raw proposal to the occupied (or recently cleaned) voxels found
/// inside its inflated region.
///
/// The result is the voxel-aligned enclosure of the qualifying voxels,
/// clipped to the inflated region.
pub fn refine_box(grid: &OccupancyGrid, clean: &CleanHistory, raw: &ObstacleBox, cfg: &RefineConfig) -> Result<Refined> {
    if raw.frame != Frame::Map {
        return Err(Error::invalid("refine_box expects a map-frame box"));
    }
    let region = raw.inflated(cfg.c_inflate);
    let mut range: Option<VoxelRange> = None;
    for v in grid.voxels_in_box(&region) {
        let i = grid.index(v);
        if !(grid.is_occupied(i) || clean.contains(i)) {
            continue;
        }
        let r = range.get_or_insert(VoxelRange { min: v, max: v });
        for a in 0..3 {
            r.min[a] = r.min[a].min(v[a]);
            r.max[a] = r.max[a].max(v[a]);
        }
    }
    let Some(r) = range else {
        return Ok(Refined { bx: *raw, refined: false, voxels: None });
    };
    let res = grid.resolution();
    let o = grid.origin();
    let lo = Vector3::from_fn(|a, _| (o[a] + r.min[a] as f64 * res).max(region.min()[a]));
    let hi = Vector3::from_fn(|a, _| (o[a] + (r.max[a] + 1) as f64 * res).min(region.max()[a]));
    let bx = ObstacleBox::from_min_max(Frame::Map, lo, hi)?;
    Ok(Refined { bx, refined: true, voxels: Some(r) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::MapConfig;
    use proptest::prelude::*;

    fn grid() -> OccupancyGrid {
        OccupancyGrid::new(Vector3::new(-1.0, -1.0, 0.0), [30, 20, 20], &MapConfig::default()).unwrap()
    }

    fn map_box(c: [f64; 3], s: [f64; 3]) -> ObstacleBox {
        ObstacleBox::new(Frame::Map, Vector3::from(c), Vector3::from(s)).unwrap()
    }

    #[test]
    fn filled_raw_box_refines_to_quantized_box() {
        let mut g = grid();
        // raw box spans voxels x 10..15, y 8..11, z 0..16 exactly
        let raw = ObstacleBox::from_min_max(Frame::Map, Vector3::new(0.0, -0.2, 0.0), Vector3::new(0.5, 0.1, 1.6)).unwrap();
        let vs: Vec<_> = g.voxels_in_box(&raw).collect();
        for v in vs {
            g.mark_occupied(v);
        }
        let r = refine_box(&g, &CleanHistory::new(10), &raw, &RefineConfig::default()).unwrap();
        assert!(r.refined);
        assert!((r.bx.min() - raw.min()).norm() < 1e-9);
        assert!((r.bx.max() - raw.max()).norm() < 1e-9);
    }

    #[test]
    fn empty_map_returns_raw_unrefined() {
        let raw = map_box([0.3, 0.1, 0.8], [0.4, 0.4, 1.6]);
        let r = refine_box(&grid(), &CleanHistory::new(10), &raw, &RefineConfig::default()).unwrap();
        assert!(!r.refined);
        assert_eq!(r.bx, raw);
        let cam = ObstacleBox::new(Frame::Camera, raw.center, raw.size).unwrap();
        assert!(refine_box(&grid(), &CleanHistory::new(10), &cam, &RefineConfig::default()).is_err());
    }

    #[test]
    fn clean_history_counts_as_occupied() {
        let g = grid();
        let mut clean = CleanHistory::new(10);
        clean.advance(3);
        clean.insert(g.index([12, 10, 5]), 3);
        let raw = map_box([0.3, 0.1, 0.6], [0.6, 0.6, 1.2]);
        let r = refine_box(&g, &clean, &raw, &RefineConfig::default()).unwrap();
        assert!(r.refined);
        assert_eq!(r.voxels, Some(VoxelRange { min: [12, 10, 5], max: [12, 10, 5] }));
    }

    fn exhaustive(g: &OccupancyGrid, clean: &CleanHistory, region: &ObstacleBox) -> Option<VoxelRange> {
        let mut out: Option<VoxelRange> = None;
        for i in 0..g.len() {
            let v = g.voxel(i);
            if region.contains_point(&g.voxel_center(v)) && (g.is_occupied(i) || clean.contains(i)) {
                let r = out.get_or_insert(VoxelRange { min: v, max: v });
                for a in 0..3 {
                    r.min[a] = r.min[a].min(v[a]);
                    r.max[a] = r.max[a].max(v[a]);
                }
            }
        }
        out
    }

    #[test]
    fn left_half_cluster_gives_minimal_enclosure() {
        let mut g = grid();
        let raw = map_box([0.5, 0.0, 1.0], [1.0, 0.6, 1.0]);
        for i in 10..14 {
            for j in 8..12 {
                for k in 6..12 {
                    g.mark_occupied([i, j, k]);
                }
            }
        }
        let r = refine_box(&g, &CleanHistory::new(10), &raw, &RefineConfig::default()).unwrap();
        let want = exhaustive(&g, &CleanHistory::new(10), &raw.inflated(1.3)).unwrap();
        assert_eq!(r.voxels, Some(want));
        assert!(r.bx.size.x < raw.size.x / 2.0 + 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn refined_box_contained_and_encloses(
            occ in prop::collection::vec((0usize..16, 0usize..16, 0usize..16), 0..60),
            cleaned in prop::collection::vec((0usize..16, 0usize..16, 0usize..16), 0..10),
            c in prop::array::uniform3(0.2f64..1.4),
            s in prop::array::uniform3(0.05f64..1.2),
            inflate in 1.0f64..2.0,
        ) {
            let mut g = OccupancyGrid::new(Vector3::zeros(), [16, 16, 16], &MapConfig::default()).unwrap();
            for (i, j, k) in occ { g.mark_occupied([i, j, k]); }
            let mut clean = CleanHistory::new(10);
            for (i, j, k) in cleaned { clean.insert(g.index([i, j, k]), 0); }
            let raw = map_box(c, s);
            let cfg = RefineConfig { c_inflate: inflate };
            let r = refine_box(&g, &clean, &raw, &cfg).unwrap();
            let region = raw.inflated(inflate);
            let want = exhaustive(&g, &clean, &region);
            prop_assert_eq!(r.voxels, want);
            prop_assert_eq!(r.refined, want.is_some());
            prop_assert!(region.contains_box(&r.bx, 1e-9) || !r.refined);
            if let Some(w) = want {
                for i in 0..g.len() {
                    let v = g.voxel(i);
                    let inside = (0..3).all(|a| v[a] >= w.min[a] && v[a] <= w.max[a]);
                    if inside && region.contains_point(&g.voxel_center(v)) {
                        prop_assert!(r.bx.contains_point(&g.voxel_center(v)));
                    }
                }
            }
        }
    }
}
