use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::{nearest_original, GmmModel};
use super::tps::fit_tps;
use super::warp::warp_volume;
use crate::seeding::{self, STREAM_AUGMENT};
use crate::shape::{CorrespondenceSet, Loadings, ShapeSpace};
use crate::volume::{write_metaimage, OutsidePolicy, Volume};
use crate::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub loadings: Loadings,
    pub nearest_index: usize,
    /// Header path relative to the output directory.
    pub volume_path: PathBuf,
    pub component: usize,
}

/// One line of the augmentation manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub loadings: Vec<f64>,
    pub nearest: usize,
    pub volume: String,
    pub component: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentOptions {
    pub count: usize,
    pub seed: u64,
    pub tps_lambda: f64,
    pub outside: OutsidePolicy,
    /// Redraws allowed per sample when its TPS system is singular.
    pub max_resamples: usize,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self {
            count: 5000,
            seed: 0,
            tps_lambda: 0.0,
            outside: OutsidePolicy::default(),
            max_resamples: 20,
        }
    }
}

/// Samples new shapes from `gmm` and synthesizes their volumes by warping the
/// nearest original's volume.
///
/// For every sample: reconstruct its correspondences, find the nearest
/// original in loading space, fit a TPS from the new correspondences to the
/// original's, pull the original volume back through it onto the original
/// grid and write `aug_<index>.mhd` into `out_dir`. Sample `i` draws from the
/// RNG derived from `seed ⊕ i`, so the output does not depend on scheduling.
/// A sample whose TPS system is singular is redrawn.
pub fn generate_augmented(
    space: &ShapeSpace,
    gmm: &GmmModel,
    originals: &CorrespondenceSet,
    original_loadings: &[Vec<f64>],
    volumes: &[Volume],
    options: &AugmentOptions,
    out_dir: &Path,
) -> Result<Vec<AugmentedSample>> {
    let s = originals.shape_count();
    if original_loadings.len() != s || volumes.len() != s {
        return Err(Error::invalid(format!(
            "{s} original shapes but {} loading rows and {} volumes",
            original_loadings.len(),
            volumes.len()
        )));
    }
    if gmm.dimension() != space.mode_count() {
        return Err(Error::invalid(format!(
            "mixture dimension {} does not match {} shape modes",
            gmm.dimension(),
            space.mode_count()
        )));
    }
    if options.count == 0 {
        return Err(Error::invalid("augmentation count must be at least 1"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let width = options.count.to_string().len().max(5);

    let samples = (0..options.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::rng(options.seed, i as u64, STREAM_AUGMENT);
            let mut attempts = 0;
            loop {
                let (values, component) = gmm.sample_one(&mut rng);
                let loadings = Loadings(values);
                let corr = space.reconstruct_points(&loadings)?;
                let nearest = nearest_original(loadings.values(), original_loadings)?;
                match fit_tps(&corr, originals.shape(nearest), options.tps_lambda) {
                    Ok(tps) => {
                        let original = &volumes[nearest];
                        let warped = warp_volume(original, &tps, *original.grid(), options.outside)?;
                        let name = PathBuf::from(format!("aug_{i:0width$}.mhd"));
                        write_metaimage(&warped, &out_dir.join(&name))?;
                        return Ok(AugmentedSample {
                            loadings,
                            nearest_index: nearest,
                            volume_path: name,
                            component,
                        });
                    }
                    Err(Error::Numeric(msg)) if attempts < options.max_resamples => {
                        log::warn!("augmented sample {i}: skipping draw ({msg}), resampling");
                        attempts += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = out_dir.join(MANIFEST_NAME);
    let mut file = fs::File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
    for sample in &samples {
        let record = ManifestRecord {
            loadings: sample.loadings.0.clone(),
            nearest: sample.nearest_index,
            volume: sample.volume_path.to_string_lossy().into_owned(),
            component: sample.component,
        };
        writeln!(file, "{}", serde_json::to_string(&record)?).map_err(|e| Error::io(&manifest, e))?;
    }
    Ok(samples)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::format(path, format!("record {}: {e}", i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::fit_shape_space;
    use crate::volume::synth::{synth_population, SyntheticPopulationSpec};
    use nalgebra::DMatrix;

    fn small_population() -> (CorrespondenceSet, Vec<Volume>) {
        let spec = SyntheticPopulationSpec {
            count: 6,
            dims: [12, 12, 12],
            spacing: 5.0,
            landmark_count: 30,
            ..Default::default()
        };
        let pop = synth_population(&spec).unwrap();
        (pop.correspondences, pop.volumes)
    }

    #[test]
    fn collapsed_mixture_reproduces_an_original() {
        let (set, volumes) = small_population();
        // Keep every mode so reconstructing a training loading is exact.
        let space = fit_shape_space(&set, 1.0).unwrap();
        let loadings: Vec<Vec<f64>> = space.project_set(&set).unwrap().into_iter().map(|l| l.0).collect();
        let k = space.mode_count();
        let gmm = GmmModel::new(vec![1.0], vec![loadings[3].clone()], vec![DMatrix::zeros(k, k)], 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let options = AugmentOptions { count: 1, seed: 4, ..Default::default() };
        let out = generate_augmented(&space, &gmm, &set, &loadings, &volumes, &options, dir.path()).unwrap();
        assert_eq!(out[0].nearest_index, 3);
        let warped = crate::volume::read_metaimage(&dir.path().join(&out[0].volume_path)).unwrap();
        assert!(warped.mean_abs_difference(&volumes[3]).unwrap() < 1e-6);
        let manifest = read_manifest(&dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(manifest.len(), 1);
        assert_eq!(manifest[0].nearest, 3);
        assert_eq!(manifest[0].volume, "aug_00000.mhd");
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let (set, volumes) = small_population();
        let space = fit_shape_space(&set, 0.9).unwrap();
        let loadings: Vec<Vec<f64>> = space.project_set(&set).unwrap().into_iter().map(|l| l.0).collect();
        let k = space.mode_count();
        let gmm = GmmModel::new(vec![1.0], vec![vec![0.0; k]], vec![DMatrix::identity(k, k)], 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = AugmentOptions { count: 1, ..Default::default() };
        assert!(generate_augmented(&space, &gmm, &set, &loadings[..2], &volumes, &opts, dir.path()).is_err());
        assert!(generate_augmented(&space, &gmm, &set, &loadings, &volumes[..2], &opts, dir.path()).is_err());
    }
}
