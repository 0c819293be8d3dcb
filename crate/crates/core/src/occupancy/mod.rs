//! Static occupancy voxel map: log-odds integration of depth frames,
//! refinement of region proposals against the map, dynamic-region cleaning
//! and collision raycasts along paths.

mod clean;
mod refine;
mod traversal;

use std::io::{Read, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{back_project, DepthImage, ObstacleBox, Pose};

pub use clean::{clean_dynamic_region, CleanHistory, DynamicBoxHistory};
pub use refine::{refine_box, RefineConfig, Refined, VoxelRange};
pub use traversal::VoxelWalk;

/// Log-odds values are clamped to `[-LOG_ODDS_CLAMP, LOG_ODDS_CLAMP]`.
pub const LOG_ODDS_CLAMP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    /// Meters per voxel.
    pub resolution: f64,
    pub hit_update: f64,
    pub miss_update: f64,
    pub occupied_threshold: f64,
    pub free_threshold: f64,
    /// Integrate every `pixel_stride`-th pixel in both image directions.
    pub pixel_stride: usize,
    /// Frames a cleaned voxel stays in the clean history (`f`).
    pub clean_frames: u64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            resolution: 0.1,
            hit_update: 0.85,
            miss_update: -0.4,
            occupied_threshold: 1.5,
            free_threshold: -1.0,
            pixel_stride: 1,
            clean_frames: 10,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::config("map resolution must be > 0"));
        }
        if !(self.free_threshold < self.occupied_threshold) {
            return Err(Error::config("free_threshold must be below occupied_threshold"));
        }
        if !(self.hit_update > 0.0 && self.miss_update < 0.0) {
            return Err(Error::config("hit_update must be > 0 and miss_update < 0"));
        }
        if self.pixel_stride == 0 || self.clean_frames == 0 {
            return Err(Error::config("pixel_stride and clean_frames must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Vector3<f64>,
    dims: [usize; 3],
    cells: Vec<f32>,
    hit_update: f64,
    miss_update: f64,
    occupied_threshold: f64,
    free_threshold: f64,
    // per-frame hit/miss tallies, reused between frames
    hits: Vec<u32>,
    misses: Vec<u32>,
    touched: Vec<usize>,
}

impl PartialEq for OccupancyGrid {
    fn eq(&self, other: &Self) -> bool {
        self.resolution == other.resolution
            && self.origin == other.origin
            && self.dims == other.dims
            && self.cells == other.cells
    }
}

impl OccupancyGrid {
    pub fn new(origin: Vector3<f64>, dims: [usize; 3], cfg: &MapConfig) -> Result<Self> {
        cfg.validate()?;
        if dims.contains(&0) {
            return Err(Error::invalid("grid dimensions must be nonzero"));
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| Error::invalid("grid too large"))?;
        Ok(Self {
            resolution: cfg.resolution,
            origin,
            dims,
            cells: vec![0.0; n],
            hit_update: cfg.hit_update,
            miss_update: cfg.miss_update,
            occupied_threshold: cfg.occupied_threshold,
            free_threshold: cfg.free_threshold,
            hits: Vec::new(),
            misses: Vec::new(),
            touched: Vec::new(),
        })
    }

    /// Grid covering the axis-aligned region `[min, max]`.
    pub fn covering(min: Vector3<f64>, max: Vector3<f64>, cfg: &MapConfig) -> Result<Self> {
        let ext = (max - min) / cfg.resolution;
        let dims = [0, 1, 2].map(|a| ext[a].ceil().max(1.0) as usize);
        Self::new(min, dims, cfg)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn free_threshold(&self) -> f64 {
        self.free_threshold
    }

    pub fn occupied_threshold(&self) -> f64 {
        self.occupied_threshold
    }

    #[inline]
    pub fn index(&self, v: [usize; 3]) -> usize {
        v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])
    }

    pub fn voxel(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let yz = index / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    pub fn voxel_of(&self, p: &Vector3<f64>) -> Option<[usize; 3]> {
        let mut v = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.resolution).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            v[a] = f as usize;
        }
        Some(v)
    }

    pub fn voxel_center(&self, v: [usize; 3]) -> Vector3<f64> {
        Vector3::new(
            self.origin.x + (v[0] as f64 + 0.5) * self.resolution,
            self.origin.y + (v[1] as f64 + 0.5) * self.resolution,
            self.origin.z + (v[2] as f64 + 0.5) * self.resolution,
        )
    }

    pub fn log_odds(&self, index: usize) -> f32 {
        self.cells[index]
    }

    pub fn set_log_odds(&mut self, index: usize, value: f64) {
        self.cells[index] = value.clamp(-LOG_ODDS_CLAMP, LOG_ODDS_CLAMP) as f32;
    }

    #[inline]
    pub fn is_occupied(&self, index: usize) -> bool {
        f64::from(self.cells[index]) >= self.occupied_threshold
    }

    /// Points outside the grid are reported free.
    pub fn is_occupied_at(&self, p: &Vector3<f64>) -> bool {
        self.voxel_of(p).is_some_and(|v| self.is_occupied(self.index(v)))
    }

    pub fn occupied_count(&self) -> usize {
        (0..self.cells.len()).filter(|&i| self.is_occupied(i)).count()
    }

    /// Marks a voxel occupied at the clamp ceiling.
    pub fn mark_occupied(&mut self, v: [usize; 3]) {
        let i = self.index(v);
        self.cells[i] = LOG_ODDS_CLAMP as f32;
    }

    fn to_grid_units(&self, p: &Vector3<f64>) -> Vector3<f64> {
        (p - self.origin) / self.resolution
    }

    /// Integrates one depth frame. Each valid (strided) pixel adds a hit to
    /// the voxel holding its back-projected endpoint and a miss to every voxel
    /// the camera ray crosses before it. Tallies are summed per voxel over the
    /// whole frame and applied once, so the result does not depend on pixel
    /// order.
    pub fn integrate_depth(&mut self, img: &DepthImage, pose: &Pose, pixel_stride: usize) {
        let stride = pixel_stride.max(1);
        if self.hits.len() != self.cells.len() {
            self.hits = vec![0; self.cells.len()];
            self.misses = vec![0; self.cells.len()];
        }
        let intr = *img.intrinsics();
        let cam = self.to_grid_units(&pose.translation);
        for v in (0..img.height()).step_by(stride) {
            let row = img.row(v);
            for u in (0..img.width()).step_by(stride) {
                let d = row[u];
                if d <= 0.0 {
                    continue;
                }
                let pc = back_project(u as f64, v as f64, f64::from(d), &intr);
                let end = self.to_grid_units(&pose.transform_point(&pc));
                let end_voxel = self.voxel_of_grid_units(&end);
                for vox in VoxelWalk::new(cam, end, self.dims) {
                    if Some(vox) == end_voxel {
                        break;
                    }
                    let i = self.index(vox);
                    if self.hits[i] == 0 && self.misses[i] == 0 {
                        self.touched.push(i);
                    }
                    self.misses[i] += 1;
                }
                if let Some(ev) = end_voxel {
                    let i = self.index(ev);
                    if self.hits[i] == 0 && self.misses[i] == 0 {
                        self.touched.push(i);
                    }
                    self.hits[i] += 1;
                }
            }
        }
        for &i in &self.touched {
            let delta = f64::from(self.hits[i]) * self.hit_update + f64::from(self.misses[i]) * self.miss_update;
            self.cells[i] = (f64::from(self.cells[i]) + delta).clamp(-LOG_ODDS_CLAMP, LOG_ODDS_CLAMP) as f32;
            self.hits[i] = 0;
            self.misses[i] = 0;
        }
        self.touched.clear();
    }

    fn voxel_of_grid_units(&self, g: &Vector3<f64>) -> Option<[usize; 3]> {
        let mut v = [0usize; 3];
        for a in 0..3 {
            let f = g[a].floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            v[a] = f as usize;
        }
        Some(v)
    }

    /// Arc length along `path` to the first sample inside an occupied voxel,
    /// sampling every half voxel. Returns the full length when the path is
    /// clear and 0 when it starts inside an occupied voxel.
    pub fn raycast_collision_distance(&self, path: &[Vector3<f64>]) -> Result<f64> {
        Ok(self.first_collision(path)?.unwrap_or_else(|| polyline_length(path)))
    }

    /// Like [`Self::raycast_collision_distance`] but `None` when the path is
    /// clear, so a zero-length path inside an occupied voxel still reports a
    /// collision.
    pub fn first_collision(&self, path: &[Vector3<f64>]) -> Result<Option<f64>> {
        if path.len() < 2 {
            return Err(Error::invalid("collision path needs at least two points"));
        }
        let step = self.resolution / 2.0;
        let mut travelled = 0.0;
        // samples sit at multiples of `step` along the whole polyline
        let mut next = 0.0;
        for seg in path.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = (b - a).norm();
            while next <= travelled + len {
                let p = if len > 0.0 { a + (b - a) * ((next - travelled) / len) } else { a };
                if self.is_occupied_at(&p) {
                    return Ok(Some(next));
                }
                next += step;
            }
            travelled += len;
        }
        if self.is_occupied_at(path.last().expect("len >= 2")) {
            return Ok(Some(travelled));
        }
        Ok(None)
    }

    /// Voxel index range whose centers lie inside `bx`, clipped to the grid.
    pub fn voxels_in_box(&self, bx: &ObstacleBox) -> impl Iterator<Item = [usize; 3]> + '_ {
        let bx = *bx;
        let (lo, hi) = (bx.min(), bx.max());
        let mut range = [(0usize, 0usize); 3];
        let mut empty = false;
        for a in 0..3 {
            // one voxel of slack either side; the center test below decides
            let first = ((lo[a] - self.origin[a]) / self.resolution - 0.5).floor() as i64 - 1;
            let last = ((hi[a] - self.origin[a]) / self.resolution - 0.5).ceil() as i64 + 1;
            let first = first.max(0);
            let last = last.min(self.dims[a] as i64 - 1);
            if first > last {
                empty = true;
            }
            range[a] = (first.max(0) as usize, last.max(0) as usize);
        }
        let [rx, ry, rz] = range;
        let iter = (rz.0..=rz.1).flat_map(move |k| {
            (ry.0..=ry.1).flat_map(move |j| (rx.0..=rx.1).map(move |i| [i, j, k]))
        });
        iter.filter(move |&v| !empty && bx.contains_point(&self.voxel_center(v)))
    }

    /// Binary dump: resolution (f64), origin (3 x f64), dims (3 x u32), then
    /// one f32 log-odds per voxel in x-fastest order; all little-endian.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.resolution.to_le_bytes())?;
        for a in 0..3 {
            w.write_all(&self.origin[a].to_le_bytes())?;
        }
        for a in 0..3 {
            w.write_all(&(self.dims[a] as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.cells.len() * 4);
        for c in &self.cells {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// Reads a dump; thresholds and update weights come from `cfg`, whose
    /// resolution is overridden by the dump's.
    pub fn read_dump<R: Read>(mut r: R, cfg: &MapConfig) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::format("grid dump", e.to_string()))?;
        const HEADER: usize = 8 * 4 + 4 * 3;
        if bytes.len() < HEADER {
            return Err(Error::format("grid dump", "truncated header"));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let resolution = f64_at(0);
        let origin = Vector3::new(f64_at(8), f64_at(16), f64_at(24));
        let dims = [u32_at(32), u32_at(36), u32_at(40)];
        let cfg = MapConfig { resolution, ..cfg.clone() };
        let mut grid = Self::new(origin, dims, &cfg)?;
        let payload = &bytes[HEADER..];
        if payload.len() != grid.cells.len() * 4 {
            return Err(Error::format(
                "grid dump",
                format!("expected {} payload bytes, found {}", grid.cells.len() * 4, payload.len()),
            ));
        }
        for (c, chunk) in grid.cells.iter_mut().zip(payload.chunks_exact(4)) {
            *c = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(grid)
    }
}

pub fn polyline_length(path: &[Vector3<f64>]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}
