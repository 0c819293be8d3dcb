use std::collections::{HashMap, VecDeque};

use super::OccupancyGrid;
use crate::geometry::ObstacleBox;

/// Voxels recently freed by dynamic-region cleaning, keyed by voxel index.
///
/// Refinement treats these as occupied so that an obstacle whose voxels were
/// just cleaned can still be boxed on the following frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CleanHistory {
    entries: HashMap<usize, u64>,
    window: u64,
    current: u64,
}

impl CleanHistory {
    /// `window` is the number of frames an entry survives.
    pub fn new(window: u64) -> Self {
        Self { entries: HashMap::new(), window, current: 0 }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn current(&self) -> u64 {
        self.current
    }

    /// Moves the clock to `frame` and evicts entries older than the window.
    pub fn advance(&mut self, frame: u64) {
        self.current = self.current.max(frame);
        let (now, window) = (self.current, self.window);
        self.entries.retain(|_, &mut stamp| now.saturating_sub(stamp) <= window);
    }

    pub fn insert(&mut self, index: usize, frame: u64) {
        self.entries.insert(index, frame);
    }

    pub fn contains(&self, index: usize) -> bool {
        self.entries.contains_key(&index)
    }

    pub fn stamp(&self, index: usize) -> Option<u64> {
        self.entries.get(&index).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn oldest_age(&self) -> Option<u64> {
        self.entries.values().map(|&s| self.current.saturating_sub(s)).max()
    }
}

/// Map-frame boxes of dynamic obstacles over the last `window` frames.
#[derive(Debug, Clone, Default)]
pub struct DynamicBoxHistory {
    frames: VecDeque<(u64, Vec<ObstacleBox>)>,
    window: u64,
}

impl DynamicBoxHistory {
    pub fn new(window: u64) -> Self {
        Self { frames: VecDeque::new(), window }
    }

    /// Records the boxes seen at `frame` and drops frames that fell out of
    /// the window.
    pub fn push(&mut self, frame: u64, boxes: Vec<ObstacleBox>) {
        self.frames.push_back((frame, boxes));
        while let Some(&(f, _)) = self.frames.front() {
            if frame.saturating_sub(f) >= self.window {
                self.frames.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn boxes(&self) -> impl Iterator<Item = &ObstacleBox> {
        self.frames.iter().flat_map(|(_, b)| b.iter())
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

/// Frees every occupied voxel whose center lies inside one of the boxes
/// (each inflated by `c_inflate`) and records it in `clean` at `frame`.
/// Returns the number of voxels freed.
pub fn clean_dynamic_region<'a>(
    grid: &mut OccupancyGrid,
    clean: &mut CleanHistory,
    boxes: impl IntoIterator<Item = &'a ObstacleBox>,
    c_inflate: f64,
    frame: u64,
) -> usize {
    clean.advance(frame);
    let free = grid.free_threshold() - 1.0;
    let mut freed = 0;
    for bx in boxes {
        let region = bx.inflated(c_inflate);
        let hits: Vec<usize> = grid
            .voxels_in_box(&region)
            .map(|v| grid.index(v))
            .filter(|&i| grid.is_occupied(i))
            .collect();
        for i in hits {
            grid.set_log_odds(i, free);
            clean.insert(i, frame);
            freed += 1;
        }
    }
    freed
}
