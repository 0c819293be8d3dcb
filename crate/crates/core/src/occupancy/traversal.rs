use nalgebra::Vector3;

/// Uniform-grid voxel walk along a segment (Amanatides & Woo).
///
/// Coordinates are in voxel units relative to the grid origin, so voxel
/// `(i, j, k)` spans `[i, i+1) x [j, j+1) x [k, k+1)`. The segment is clipped
/// to the grid first; voxels are yielded in order of entry.
pub struct VoxelWalk {
    voxel: [i64; 3],
    step: [i64; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    t_end: f64,
    dims: [i64; 3],
    done: bool,
}

fn clip(start: &Vector3<f64>, dir: &Vector3<f64>, dims: [usize; 3]) -> Option<(f64, f64)> {
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for a in 0..3 {
        let hi = dims[a] as f64;
        if dir[a] == 0.0 {
            if start[a] < 0.0 || start[a] >= hi {
                return None;
            }
        } else {
            let inv = 1.0 / dir[a];
            let (mut ta, mut tb) = ((0.0 - start[a]) * inv, (hi - start[a]) * inv);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
    }
    (t0 < t1).then_some((t0, t1))
}

impl VoxelWalk {
    pub fn new(start: Vector3<f64>, end: Vector3<f64>, dims: [usize; 3]) -> Self {
        let dir = end - start;
        let idims = dims.map(|d| d as i64);
        let Some((t0, t1)) = clip(&start, &dir, dims) else {
            return Self {
                voxel: [0; 3],
                step: [0; 3],
                t_max: [f64::INFINITY; 3],
                t_delta: [f64::INFINITY; 3],
                t_end: 0.0,
                dims: idims,
                done: true,
            };
        };
        let entry = start + dir * t0;
        let mut voxel = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            voxel[a] = (entry[a].floor() as i64).clamp(0, idims[a] - 1);
            if dir[a] > 0.0 {
                step[a] = 1;
                t_delta[a] = 1.0 / dir[a];
                t_max[a] = (voxel[a] as f64 + 1.0 - start[a]) / dir[a];
            } else if dir[a] < 0.0 {
                step[a] = -1;
                t_delta[a] = -1.0 / dir[a];
                t_max[a] = (voxel[a] as f64 - start[a]) / dir[a];
            }
        }
        Self {
            voxel,
            step,
            t_max,
            t_delta,
            t_end: t1,
            dims: idims,
            done: false,
        }
    }
}

impl Iterator for VoxelWalk {
    type Item = [usize; 3];

    fn next(&mut self) -> Option<[usize; 3]> {
        if self.done {
            return None;
        }
        let out = self.voxel.map(|v| v as usize);
        let a = if self.t_max[0] < self.t_max[1] {
            if self.t_max[0] < self.t_max[2] { 0 } else { 2 }
        } else if self.t_max[1] < self.t_max[2] {
            1
        } else {
            2
        };
        if self.t_max[a] >= self.t_end {
            self.done = true;
        } else {
            self.voxel[a] += self.step[a];
            self.t_max[a] += self.t_delta[a];
            if self.voxel[a] < 0 || self.voxel[a] >= self.dims[a] {
                self.done = true;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Slab test: does the open segment overlap the unit voxel with positive length?
    fn segment_hits_voxel(s: &Vector3<f64>, e: &Vector3<f64>, v: [usize; 3], min_len: f64) -> bool {
        let d = e - s;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for a in 0..3 {
            let lo = v[a] as f64;
            let hi = lo + 1.0;
            if d[a] == 0.0 {
                if s[a] < lo || s[a] > hi {
                    return false;
                }
            } else {
                let (mut ta, mut tb) = ((lo - s[a]) / d[a], (hi - s[a]) / d[a]);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
            }
        }
        t1 - t0 > min_len
    }

    #[test]
    fn axis_aligned_walk() {
        let v: Vec<_> = VoxelWalk::new(Vector3::new(0.5, 0.5, 0.5), Vector3::new(3.5, 0.5, 0.5), [5, 1, 1]).collect();
        assert_eq!(v, vec![[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]);
    }

    #[test]
    fn segment_outside_grid_is_empty() {
        assert_eq!(VoxelWalk::new(Vector3::new(-3.0, 0.5, 0.5), Vector3::new(-1.0, 0.5, 0.5), [4, 4, 4]).count(), 0);
    }

    #[test]
    fn clipped_entry_from_outside() {
        let v: Vec<_> = VoxelWalk::new(Vector3::new(-2.5, 1.5, 1.5), Vector3::new(1.5, 1.5, 1.5), [4, 4, 4]).collect();
        assert_eq!(v, vec![[0, 1, 1], [1, 1, 1]]);
    }

    proptest! {
        #[test]
        fn walk_matches_slab_oracle(
            s in prop::array::uniform3(-2.0f64..10.0),
            e in prop::array::uniform3(-2.0f64..10.0),
        ) {
            let (s, e) = (Vector3::from(s), Vector3::from(e));
            let dims = [8, 8, 8];
            let walked: std::collections::BTreeSet<_> = VoxelWalk::new(s, e, dims).collect();
            let mut oracle = std::collections::BTreeSet::new();
            for i in 0..8 { for j in 0..8 { for k in 0..8 {
                if segment_hits_voxel(&s, &e, [i, j, k], 1e-9) { oracle.insert([i, j, k]); }
            }}}
            // grazing contacts shorter than 1e-9 are ignored by the oracle
            prop_assert!(oracle.is_subset(&walked), "missing {:?}", oracle.difference(&walked).collect::<Vec<_>>());
            for v in walked.difference(&oracle) {
                prop_assert!(segment_hits_voxel(&s, &e, *v, -1e-9), "spurious {:?}", v);
            }
        }
    }
}
