//! Axis-aligned scalar volumes with physical spacing and origin.
//!
//! Intensities are stored single precision, x fastest. Voxel `(i, j, k)` sits
//! at `origin + (i·sx, j·sy, k·sz)`; there is no direction-cosine matrix.

mod metaimage;
pub mod synth;

pub use metaimage::{read_metaimage, write_metaimage};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sampling grid: voxel counts, spacing (mm/voxel) and origin (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid(format!("grid dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
        })
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn index_to_physical(&self, index: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.origin[a] + index[a] * self.spacing[a])
    }

    pub fn physical_to_index(&self, point: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| (point[a] - self.origin[a]) / self.spacing[a])
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        self.index_to_physical([i as f64, j as f64, k as f64])
    }

    /// Physical center of the grid's bounding box.
    pub fn center(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.origin[a] + 0.5 * (self.dims[a] - 1) as f64 * self.spacing[a])
    }
}

/// What trilinear sampling returns outside the voxel lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutsidePolicy {
    Constant(f64),
    Clamp,
}

impl Default for OutsidePolicy {
    fn default() -> Self {
        OutsidePolicy::Constant(0.0)
    }
}

/// Continuous indices within this distance of a lattice point snap to it, so
/// round-off from the physical mapping or a transform cannot blur voxel
/// centers or zero out boundary voxels.
const INSIDE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: Grid,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(grid: Grid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.voxel_count() {
            return Err(Error::invalid(format!(
                "volume has {} intensities, grid needs {}",
                data.len(),
                grid.voxel_count()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("volume intensities must be finite"));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.voxel_count()],
        }
    }

    /// Evaluates `f` at every voxel center.
    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 3]) -> f64) -> Result<Self> {
        let [nx, ny, nz] = grid.dims;
        let mut data = Vec::with_capacity(grid.voxel_count());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    data.push(f(grid.voxel_center(i, j, k)) as f32);
                }
            }
        }
        Self::new(grid, data)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.grid.linear_index(i, j, k)]
    }

    /// Trilinear interpolation at a physical point. Exact at voxel centers.
    pub fn sample_trilinear(&self, point: [f64; 3], outside: OutsidePolicy) -> f64 {
        let mut index = self.grid.physical_to_index(point);
        for (a, u) in index.iter_mut().enumerate() {
            let nearest = u.round();
            if (*u - nearest).abs() < INSIDE_SLACK {
                *u = nearest;
            }
            let hi = (self.grid.dims[a] - 1) as f64;
            if *u < 0.0 || *u > hi {
                let inside = *u >= -INSIDE_SLACK && *u <= hi + INSIDE_SLACK;
                match outside {
                    OutsidePolicy::Constant(c) if !inside => return c,
                    _ => *u = u.clamp(0.0, hi),
                }
            }
        }
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = self.grid.dims[a];
            if n == 1 {
                continue;
            }
            let i0 = (index[a].floor() as usize).min(n - 2);
            base[a] = i0;
            frac[a] = index[a] - i0 as f64;
        }
        let step = |a: usize| usize::from(self.grid.dims[a] > 1);
        let (sx, sy, sz) = (step(0), step(1), step(2));
        let [nx, ny, _] = self.grid.dims;
        let at = |di: usize, dj: usize, dk: usize| {
            f64::from(self.data[(base[0] + di) + nx * ((base[1] + dj) + ny * (base[2] + dk))])
        };
        let lerp = |a: f64, b: f64, t: f64| (1.0 - t) * a + t * b;
        let c00 = lerp(at(0, 0, 0), at(sx, 0, 0), frac[0]);
        let c10 = lerp(at(0, sy, 0), at(sx, sy, 0), frac[0]);
        let c01 = lerp(at(0, 0, sz), at(sx, 0, sz), frac[0]);
        let c11 = lerp(at(0, sy, sz), at(sx, sy, sz), frac[0]);
        lerp(lerp(c00, c10, frac[1]), lerp(c01, c11, frac[1]), frac[2])
    }

    pub fn mean_abs_difference(&self, other: &Volume) -> Option<f64> {
        if self.grid.dims != other.grid.dims {
            return None;
        }
        let total: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| f64::from((a - b).abs()))
            .sum();
        Some(total / self.data.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(dims: [usize; 3]) -> Grid {
        Grid::new(dims, [2.0, 1.5, 0.5], [-3.0, 4.0, 10.0]).unwrap()
    }

    #[test]
    fn exact_at_voxel_centers() {
        let g = grid([4, 3, 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = (0..g.voxel_count()).map(|_| rng.random::<f32>() * 100.0).collect();
        let v = Volume::new(g, data).unwrap();
        for k in 0..5 {
            for j in 0..3 {
                for i in 0..4 {
                    let s = v.sample_trilinear(g.voxel_center(i, j, k), OutsidePolicy::default());
                    assert_eq!(s, f64::from(v.get(i, j, k)));
                }
            }
        }
    }

    #[test]
    fn midpoint_between_neighbours() {
        let g = Grid::new([2, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        let v = Volume::new(g, vec![0.0, 10.0]).unwrap();
        assert_eq!(v.sample_trilinear([0.5, 0.0, 0.0], OutsidePolicy::default()), 5.0);
    }

    #[test]
    fn exact_on_linear_fields() {
        let g = grid([6, 7, 8]);
        let field = |p: [f64; 3]| 2.0 * p[0] + 3.0 * p[1] - p[2];
        let v = Volume::from_fn(g, field).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lo = g.origin;
        let hi = g.index_to_physical([5.0, 6.0, 7.0]);
        for _ in 0..100 {
            let p: [f64; 3] = std::array::from_fn(|a| rng.random_range(lo[a]..hi[a]));
            let got = v.sample_trilinear(p, OutsidePolicy::default());
            // Dyadic spacing and integer origin keep the voxel values exact in f32.
            assert!((got - field(p)).abs() < 1e-6, "{got} vs {}", field(p));
        }
    }

    #[test]
    fn outside_policies() {
        let g = Grid::new([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        let v = Volume::new(g, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(v.sample_trilinear([-0.5, 0.0, 0.0], OutsidePolicy::Constant(-1.0)), -1.0);
        assert_eq!(v.sample_trilinear([-0.5, 0.0, 0.0], OutsidePolicy::Clamp), 1.0);
        assert_eq!(v.sample_trilinear([5.0, 5.0, 5.0], OutsidePolicy::Clamp), 8.0);
        // Round-off just past the last voxel still counts as inside.
        assert_eq!(v.sample_trilinear([1.0 + 1e-12, 1.0, 1.0], OutsidePolicy::default()), 8.0);
    }

    #[test]
    fn single_voxel_axis() {
        let g = Grid::new([3, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        let v = Volume::new(g, vec![0.0, 4.0, 8.0]).unwrap();
        assert_eq!(v.sample_trilinear([1.5, 0.0, 0.0], OutsidePolicy::default()), 6.0);
    }

    #[test]
    fn index_physical_roundtrip() {
        let g = grid([4, 4, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-50.0..50.0));
            let back = g.index_to_physical(g.physical_to_index(p));
            for a in 0..3 {
                assert!((back[a] - p[a]).abs() <= 1e-12 * p[a].abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Grid::new([0, 1, 1], [1.0; 3], [0.0; 3]).is_err());
        assert!(Grid::new([1, 1, 1], [0.0, 1.0, 1.0], [0.0; 3]).is_err());
        let g = Grid::new([2, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        assert!(Volume::new(g, vec![0.0]).is_err());
        assert!(Volume::new(g, vec![0.0, f32::NAN]).is_err());
    }
}
