//! Synthetic shape population for desk-scale verification.
//!
//! Each shape is a star-shaped closed surface around the grid center whose
//! radius along direction `u` is an ellipsoid radius modulated by smooth
//! lobes. Latent factor 0..3 scale the three ellipsoid axes; every further
//! factor grows or shrinks one lobe. Correspondence `j` is the surface point
//! along a fixed direction `u_j`, so landmark identity is shared by every
//! shape by construction.
//!
//! The implicit function used for intensities is the radial signed distance
//! `|x − c| − R(û)`. It vanishes exactly on the surface and matches the
//! Euclidean signed distance to first order for these smooth shapes.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Grid, Volume};
use crate::mesh::sphere::ring_sphere;
use crate::mesh::TriangleMesh;
use crate::seeding::{self, STREAM_LABELS, STREAM_LATENT, STREAM_VOLUME_NOISE};
use crate::shape::{CorrespondenceSet, Point3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticPopulationSpec {
    pub count: usize,
    pub latent_dim: usize,
    pub dims: [usize; 3],
    /// Isotropic voxel spacing, mm.
    pub spacing: f64,
    pub landmark_count: usize,
    /// Multiplies the standard-normal latent draws; 0 gives identical shapes.
    pub latent_scale: f64,
    /// Standard deviation of additive Gaussian intensity noise.
    pub intensity_noise: f64,
    /// Standard deviation of the logit noise in the recurrence labels.
    pub label_noise: f64,
    /// Width of the sigmoid intensity edge, in voxels.
    pub edge_width_voxels: f64,
    pub seed: u64,
}

impl Default for SyntheticPopulationSpec {
    fn default() -> Self {
        Self {
            count: 200,
            latent_dim: 4,
            dims: [32, 32, 32],
            spacing: 2.0,
            landmark_count: 128,
            latent_scale: 1.0,
            intensity_noise: 5.0,
            label_noise: 0.5,
            edge_width_voxels: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticPopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::invalid("synthetic population needs count >= 2"));
        }
        if self.latent_dim < 1 {
            return Err(Error::invalid("synthetic population needs latent_dim >= 1"));
        }
        if self.dims.iter().any(|&n| n < 4) {
            return Err(Error::invalid("synthetic grid needs at least 4 voxels per axis"));
        }
        if !(self.spacing > 0.0) || !(self.edge_width_voxels > 0.0) {
            return Err(Error::invalid("spacing and edge width must be positive"));
        }
        if !(self.latent_scale >= 0.0) || !(self.intensity_noise >= 0.0) || !(self.label_noise >= 0.0) {
            return Err(Error::invalid("latent scale and noise levels must be nonnegative"));
        }
        if self.landmark_count < 5 {
            return Err(Error::invalid("synthetic population needs at least 5 landmarks"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let s = self.spacing;
        Grid::new(self.dims, [s, s, s], [0.0; 3])
    }
}

/// Relative change of an ellipsoid axis per unit latent.
const AXIS_GAIN: f64 = 0.35;
/// Relative lobe height per unit latent.
const LOBE_GAIN: f64 = 0.3;
/// Angular width of a lobe, in units of `1 − cos`.
const LOBE_WIDTH: f64 = 0.2;

/// The deterministic radial shape family behind a population.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticShapeModel {
    center: Point3,
    half_extent: f64,
    latent_dim: usize,
    directions: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    lobes: Vec<Point3>,
}

impl SyntheticShapeModel {
    pub fn new(spec: &SyntheticPopulationSpec) -> Result<Self> {
        spec.validate()?;
        let grid = spec.grid()?;
        let half_extent = (0..3)
            .map(|a| 0.5 * (grid.dims[a] - 1) as f64 * grid.spacing[a])
            .fold(f64::INFINITY, f64::min);
        let (directions, triangles) = ring_sphere(spec.landmark_count)?;
        let lobes = (3..spec.latent_dim.max(3))
            .map(|l| golden_direction(l - 3))
            .collect();
        Ok(Self {
            center: grid.center(),
            half_extent,
            latent_dim: spec.latent_dim,
            directions,
            triangles,
            lobes,
        })
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn landmark_directions(&self) -> &[Point3] {
        &self.directions
    }

    /// Radius (mm) of shape `z` along unit direction `u`.
    pub fn radius(&self, u: Point3, z: &[f64]) -> f64 {
        let h = self.half_extent;
        let axis = |i: usize, base: f64| {
            let zi = z.get(i).copied().unwrap_or(0.0);
            base * h * (1.0 + AXIS_GAIN * zi).clamp(0.4, 1.6)
        };
        let (a, b, c) = (axis(0, 0.55), axis(1, 0.47), axis(2, 0.40));
        let mut r = 1.0 / ((u[0] / a).powi(2) + (u[1] / b).powi(2) + (u[2] / c).powi(2)).sqrt();
        for (l, d) in self.lobes.iter().enumerate() {
            let zl = z.get(3 + l).copied().unwrap_or(0.0);
            let cos = u[0] * d[0] + u[1] * d[1] + u[2] * d[2];
            let bump = (-(1.0 - cos) / LOBE_WIDTH).exp();
            r *= (1.0 + LOBE_GAIN * zl * bump).clamp(0.4, 1.6);
        }
        r.min(0.95 * h)
    }

    /// Radial signed distance: negative inside.
    pub fn signed_distance(&self, x: Point3, z: &[f64]) -> f64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if len == 0.0 {
            return -self.radius([1.0, 0.0, 0.0], z);
        }
        len - self.radius([d[0] / len, d[1] / len, d[2] / len], z)
    }

    fn surface_point(&self, u: Point3, z: &[f64]) -> Point3 {
        let r = self.radius(u, z);
        std::array::from_fn(|a| self.center[a] + r * u[a])
    }

    pub fn landmarks(&self, z: &[f64]) -> Vec<Point3> {
        self.directions.iter().map(|&u| self.surface_point(u, z)).collect()
    }

    /// Mesh whose vertices are the landmarks themselves.
    pub fn landmark_mesh(&self, z: &[f64]) -> Result<TriangleMesh> {
        TriangleMesh::new(self.landmarks(z), self.triangles.clone())
    }

    /// Finer surface mesh with `vertex_count` vertices on the shape.
    pub fn surface_mesh(&self, z: &[f64], vertex_count: usize) -> Result<TriangleMesh> {
        let (dirs, tris) = ring_sphere(vertex_count)?;
        TriangleMesh::new(dirs.iter().map(|&u| self.surface_point(u, z)).collect(), tris)
    }

    /// The shape at the latent origin, used as the population template.
    pub fn mean_latent(&self) -> Vec<f64> {
        vec![0.0; self.latent_dim]
    }
}

/// Evenly spread unit vectors along a golden-angle spiral.
fn golden_direction(i: usize) -> Point3 {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    // Spread over the sphere independent of how many lobes exist.
    let t = (i as f64 + 0.5) / 8.0;
    let zc = 1.0 - 2.0 * t.fract();
    let r = (1.0 - zc * zc).sqrt();
    let phi = golden * i as f64 + 0.7;
    [r * phi.cos(), r * phi.sin(), zc]
}

#[derive(Debug, Clone)]
pub struct SyntheticPopulation {
    pub model: SyntheticShapeModel,
    pub correspondences: CorrespondenceSet,
    pub volumes: Vec<Volume>,
    pub labels: Vec<bool>,
    /// One row of latent factors per shape.
    pub latents: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generates shapes, volumes and recurrence labels from a seeded spec.
pub fn synth_population(spec: &SyntheticPopulationSpec) -> Result<SyntheticPopulation> {
    let model = SyntheticShapeModel::new(spec)?;
    let grid = spec.grid()?;

    let mut latent_rng = seeding::rng(spec.seed, 0, STREAM_LATENT);
    let latents: Vec<Vec<f64>> = (0..spec.count)
        .map(|_| {
            (0..spec.latent_dim)
                .map(|_| spec.latent_scale * latent_rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    let mut label_rng = seeding::rng(spec.seed, 0, STREAM_LABELS);
    let labels = latents
        .iter()
        .map(|z| {
            let eta: f64 = spec.label_noise * label_rng.sample::<f64, _>(StandardNormal);
            let p = sigmoid(2.0 * z[0] + eta);
            label_rng.random::<f64>() < p
        })
        .collect();

    let correspondences =
        CorrespondenceSet::new(latents.iter().map(|z| model.landmarks(z)).collect())?;

    let width = spec.edge_width_voxels * spec.spacing;
    let volumes = latents
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let mut rng = seeding::rng(spec.seed, i as u64, STREAM_VOLUME_NOISE);
            Volume::from_fn(grid, |x| {
                let d = model.signed_distance(x, z);
                let noise: f64 = rng.sample(StandardNormal);
                100.0 * sigmoid(-d / width) + spec.intensity_noise * noise
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SyntheticPopulation {
        model,
        correspondences,
        volumes,
        labels,
        latents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::fit_shape_space;

    fn small(count: usize, seed: u64) -> SyntheticPopulationSpec {
        SyntheticPopulationSpec {
            count,
            dims: [12, 12, 12],
            spacing: 5.0,
            landmark_count: 40,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn zero_latents_give_identical_shapes() {
        let spec = SyntheticPopulationSpec { latent_scale: 0.0, ..small(5, 1) };
        let pop = synth_population(&spec).unwrap();
        for i in 1..5 {
            assert_eq!(pop.correspondences.shape(i), pop.correspondences.shape(0));
        }
        assert_eq!(fit_shape_space(&pop.correspondences, 0.95).unwrap().mode_count(), 0);
    }

    #[test]
    fn deterministic() {
        let a = synth_population(&small(6, 7)).unwrap();
        let b = synth_population(&small(6, 7)).unwrap();
        assert_eq!(a.volumes, b.volumes);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.correspondences, b.correspondences);
        let c = synth_population(&small(6, 8)).unwrap();
        assert_ne!(a.latents, c.latents);
    }

    #[test]
    fn landmarks_lie_on_the_surface() {
        let pop = synth_population(&small(8, 2)).unwrap();
        for (i, z) in pop.latents.iter().enumerate() {
            for p in pop.correspondences.shape(i) {
                assert!(pop.model.signed_distance(*p, z).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn intensity_is_bright_inside() {
        let spec = SyntheticPopulationSpec { intensity_noise: 0.0, edge_width_voxels: 0.25, ..small(2, 3) };
        let pop = synth_population(&spec).unwrap();
        let v = &pop.volumes[0];
        assert!(v.get(6, 6, 6) > 95.0);
        assert!(v.get(0, 0, 0) < 5.0);
    }

    #[test]
    fn meshes_share_vertex_count_and_connectivity() {
        let pop = synth_population(&small(3, 4)).unwrap();
        let a = pop.model.surface_mesh(&pop.latents[0], 300).unwrap();
        let b = pop.model.surface_mesh(&pop.latents[1], 300).unwrap();
        assert_eq!(a.triangles(), b.triangles());
        let lm = pop.model.landmark_mesh(&pop.latents[2]).unwrap();
        assert_eq!(lm.vertices(), pop.correspondences.shape(2));
    }

    #[test]
    fn validation() {
        assert!(synth_population(&small(1, 0)).is_err());
        assert!(synth_population(&SyntheticPopulationSpec { latent_dim: 0, ..small(3, 0) }).is_err());
    }
}
