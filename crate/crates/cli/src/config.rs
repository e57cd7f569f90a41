//! Pipeline configuration: one JSON file, every default overridable.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use voxshape_core::augment::EmOptions;
use voxshape_core::learn::TrainConfig;
use voxshape_core::stats::HotellingVariant;
use voxshape_core::volume::synth::SyntheticPopulationSpec;
use voxshape_core::FORMAT_VERSION;

use crate::CliError;

/// Input and output locations. Relative paths in a config file are resolved
/// against the file's directory; unset data paths mean "synthesize".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub particles_dir: Option<PathBuf>,
    pub volumes_dir: Option<PathBuf>,
    /// CSV `name,label` with labels 0/1.
    pub labels: Option<PathBuf>,
    /// Ground-truth meshes `<name>.obj`; without them, surface evaluation
    /// compares against the template warped by the true correspondences.
    pub meshes_dir: Option<PathBuf>,
    pub template_mesh: Option<PathBuf>,
    pub template_particles: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            particles_dir: None,
            volumes_dir: None,
            labels: None,
            meshes_dir: None,
            template_mesh: None,
            template_particles: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tolerance: f64,
    pub reg_scale: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        let em = EmOptions::default();
        Self {
            k_min: 1,
            k_max: 6,
            restarts: 3,
            max_iter: em.max_iter,
            tolerance: em.tol,
            reg_scale: em.reg_scale,
        }
    }
}

impl GmmConfig {
    pub fn em_options(&self) -> EmOptions {
        EmOptions {
            max_iter: self.max_iter,
            tol: self.tolerance,
            reg_scale: self.reg_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub count: usize,
    pub tps_lambda: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { count: 5000, tps_lambda: 0.0 }
    }
}

/// Optimizer settings; the seed comes from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adagrad_epsilon: f64,
    pub whiten_targets: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            adagrad_epsilon: t.adagrad_epsilon,
            whiten_targets: t.whiten_targets,
        }
    }
}

impl TrainSettings {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            adagrad_epsilon: self.adagrad_epsilon,
            whiten_targets: self.whiten_targets,
        }
    }

    fn recurrence_default() -> Self {
        Self { epochs: 500, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// The first `train_count` shapes (in sorted name order) train the models.
    pub train_count: usize,
    /// The next `holdout_count` shapes are evaluated.
    pub holdout_count: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_count: 175, holdout_count: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TostConfig {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
}

impl Default for TostConfig {
    fn default() -> Self {
        Self { lower: -0.06, upper: 0.06, alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub format_version: u32,
    pub seed: u64,
    pub paths: Paths,
    /// Population generated when no data paths are given.
    pub synth: SyntheticPopulationSpec,
    pub variance_threshold: f64,
    pub gmm: GmmConfig,
    pub augment: AugmentConfig,
    pub train: TrainSettings,
    pub recurrence: TrainSettings,
    pub split: SplitConfig,
    pub tost: TostConfig,
    pub hotelling: HotellingVariant,
    /// Threshold for the per-shape "sub-voxel" fraction.
    pub voxel_spacing_mm: f64,
    pub symmetric_surface_distance: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            seed: 0,
            paths: Paths::default(),
            // Enough shapes for the default split.
            synth: SyntheticPopulationSpec { count: 207, ..Default::default() },
            variance_threshold: 0.95,
            gmm: GmmConfig::default(),
            augment: AugmentConfig::default(),
            train: TrainSettings::default(),
            recurrence: TrainSettings::recurrence_default(),
            split: SplitConfig::default(),
            tost: TostConfig::default(),
            hotelling: HotellingVariant::Paired,
            voxel_spacing_mm: 2.0,
            symmetric_surface_distance: true,
        }
    }
}

impl PipelineConfig {
    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        for p in [
            &mut paths.particles_dir,
            &mut paths.volumes_dir,
            &mut paths.labels,
            &mut paths.meshes_dir,
            &mut paths.template_mesh,
            &mut paths.template_particles,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut paths.output_dir);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("unsupported config format_version {}", self.format_version));
        }
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return bad(format!("variance_threshold {} outside (0, 1]", self.variance_threshold));
        }
        if self.gmm.k_min == 0 || self.gmm.k_min > self.gmm.k_max {
            return bad(format!("invalid gmm k range {}..{}", self.gmm.k_min, self.gmm.k_max));
        }
        if self.augment.count == 0 || !(self.augment.tps_lambda >= 0.0) {
            return bad("augment count must be >= 1 and tps_lambda >= 0".into());
        }
        if self.split.train_count < 2 || self.split.holdout_count < 2 {
            return bad("split needs at least 2 training and 2 held-out shapes".into());
        }
        if !(self.tost.lower < self.tost.upper) || !(self.tost.alpha > 0.0 && self.tost.alpha < 1.0) {
            return bad("tost needs lower < upper and alpha in (0, 1)".into());
        }
        if !(self.voxel_spacing_mm > 0.0) {
            return bad("voxel_spacing_mm must be positive".into());
        }
        for (name, t) in [("train", &self.train), ("recurrence", &self.recurrence)] {
            t.with_seed(self.seed)
                .validate()
                .map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        }
        self.synth.validate().map_err(|e| CliError::Config(format!("synth: {e}")))?;
        Ok(())
    }

    /// The config as recorded in the run manifest: the output directory is
    /// where the manifest lives, so it is written as `.`.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.paths.output_dir = PathBuf::from(".");
        let out = &self.paths.output_dir;
        for p in [
            &mut c.paths.particles_dir,
            &mut c.paths.volumes_dir,
            &mut c.paths.labels,
            &mut c.paths.meshes_dir,
            &mut c.paths.template_mesh,
            &mut c.paths.template_particles,
        ]
        .into_iter()
        .flatten()
        {
            if let Ok(rel) = p.strip_prefix(out) {
                *p = rel.to_path_buf();
            }
        }
        serde_json::to_value(c).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_roundtrip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), c);
        assert_eq!(c.split.train_count, 175);
        assert_eq!(c.augment.count, 5000);
        assert_eq!(c.train.epochs, 240);
    }

    #[test]
    fn partial_file_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"format_version": 1, "seed": 4, "paths": {"particles_dir": "p", "output_dir": "o"}}"#).unwrap();
        let c = PipelineConfig::load(&path).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.paths.particles_dir, Some(dir.path().join("p")));
        assert_eq!(c.paths.output_dir, dir.path().join("o"));
        assert_eq!(c.variance_threshold, 0.95);
    }

    #[test]
    fn rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"variance_threshold": 1.5}"#).unwrap();
        assert!(matches!(PipelineConfig::load(&path), Err(CliError::Config(_))));
        fs::write(&path, r#"{"no_such_field": 1}"#).unwrap();
        assert!(matches!(PipelineConfig::load(&path), Err(CliError::Config(_))));
    }
}
