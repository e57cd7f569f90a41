//! The individual steps. Each reads only the paths it is given, writes into
//! its output location, and returns the files it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use voxshape_core::augment::{generate_augmented, read_manifest, select_gmm_bic, AugmentOptions, GmmModel, MANIFEST_NAME};
use voxshape_core::learn::{
    predict_recurrence, train_recurrence, train_regressor, write_loss_curve, RecurrenceModel, RegressorModel, TrainConfig,
};
use voxshape_core::mesh::{read_obj, surface_distance, warp_mesh_tps, write_obj, TriangleMesh};
use voxshape_core::shape::{
    fit_shape_space, load_particles, read_particle_file, write_particle_file, CorrespondenceSet, Loadings, ShapeSpace,
};
use voxshape_core::stats::{
    boxplot_csv, hotelling_paired, hotelling_two_sample, point_errors, summarize, tost, BoxStats, EquivalenceResult,
    HotellingResult, HotellingVariant,
};
use voxshape_core::volume::synth::{synth_population, SyntheticPopulationSpec};
use voxshape_core::volume::{read_metaimage, Volume};
use voxshape_core::{Error, Result, FORMAT_VERSION};

use crate::config::{AugmentConfig, GmmConfig, TostConfig};
use crate::data::{existing, particle_files, shape_name, write_file, write_json, write_synthetic, LoadingsTable};

pub const SHAPE_SPACE: &str = "shape_space.json";
pub const LOADINGS: &str = "loadings.json";
pub const GMM: &str = "gmm.json";
pub const GMM_SELECTION: &str = "gmm_selection.json";
pub const REGRESSOR: &str = "regressor.json";
pub const REGRESSOR_LOSS: &str = "regressor_loss.csv";
pub const RECURRENCE: &str = "recurrence.json";
pub const RECURRENCE_LOSS: &str = "recurrence_loss.csv";
pub const RECURRENCE_PREDICTIONS: &str = "recurrence_predictions.json";

/// Significance level used to word the loadings verdict.
pub const LOADINGS_ALPHA: f64 = 0.05;

/// Every file below `dir`, sorted.
pub fn files_under(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn synth(spec: &SyntheticPopulationSpec, out: &Path) -> Result<Vec<PathBuf>> {
    let pop = synth_population(spec)?;
    let names = write_synthetic(&pop, out)?;
    log::info!("wrote {} synthetic shapes to {}", names.len(), out.display());
    files_under(out)
}

/// Loads the named shapes (all shapes when `names` is `None`).
pub fn load_shapes(particles_dir: &Path, names: Option<&[String]>) -> Result<(Vec<String>, CorrespondenceSet)> {
    let files = particle_files(particles_dir)?;
    let picked: Vec<(String, PathBuf)> = match names {
        None => files,
        Some(names) => names
            .iter()
            .map(|n| {
                files
                    .iter()
                    .find(|(m, _)| m == n)
                    .cloned()
                    .ok_or_else(|| Error::data(format!("{}: no particles for shape {n}", particles_dir.display())))
            })
            .collect::<Result<_>>()?,
    };
    let paths: Vec<&PathBuf> = picked.iter().map(|(_, p)| p).collect();
    let set = load_particles(&paths)?;
    Ok((picked.into_iter().map(|(n, _)| n).collect(), set))
}

pub fn load_volumes(volumes_dir: &Path, names: &[String]) -> Result<Vec<Volume>> {
    names.iter().map(|n| read_metaimage(&existing(volumes_dir, n, "mhd")?)).collect()
}

/// Fits the shape space on the named shapes; writes it and their loadings.
pub fn fit_shape_space_cmd(particles_dir: &Path, names: Option<&[String]>, threshold: f64, out: &Path) -> Result<Vec<PathBuf>> {
    let (names, set) = load_shapes(particles_dir, names)?;
    let space = fit_shape_space(&set, threshold)?;
    log::info!(
        "{} modes capture {:.4} of the variance over {} shapes",
        space.mode_count(),
        space.captured_fraction(),
        set.shape_count()
    );
    if space.mode_count() == 0 {
        return Err(Error::data("shapes have no variance; the shape space is empty"));
    }
    let space_path = out.join(SHAPE_SPACE);
    let loadings_path = out.join(LOADINGS);
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    space.save(&space_path)?;
    LoadingsTable::new(names, space.project_set(&set)?).save(&loadings_path)?;
    Ok(vec![space_path, loadings_path])
}

/// Projects shapes into an existing space and writes the loadings table.
pub fn project_cmd(space: &ShapeSpace, particles_dir: &Path, names: Option<&[String]>, path: &Path) -> Result<Vec<PathBuf>> {
    let (names, set) = load_shapes(particles_dir, names)?;
    LoadingsTable::new(names, space.project_set(&set)?).save(path)?;
    Ok(vec![path.to_path_buf()])
}

pub fn fit_gmm_cmd(loadings: &Path, cfg: &GmmConfig, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let table = LoadingsTable::load(loadings)?;
    let k_max = cfg.k_max.min(table.loadings.len());
    if k_max < cfg.k_min {
        return Err(Error::data(format!(
            "{} shapes cannot support a mixture of {} or more components",
            table.loadings.len(),
            cfg.k_min
        )));
    }
    let (model, report) = select_gmm_bic(&table.loadings, cfg.k_min..=k_max, seed, cfg.restarts, &cfg.em_options())?;
    log::info!("BIC selected {} components", report.selected_k);
    let gmm_path = out.join(GMM);
    let sel_path = out.join(GMM_SELECTION);
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    model.save(&gmm_path)?;
    write_json(&sel_path, &report)?;
    Ok(vec![gmm_path, sel_path])
}

#[allow(clippy::too_many_arguments)]
pub fn augment_cmd(
    space_path: &Path,
    gmm_path: &Path,
    particles_dir: &Path,
    volumes_dir: &Path,
    names: Option<&[String]>,
    cfg: &AugmentConfig,
    seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let space = ShapeSpace::load(space_path)?;
    let gmm = GmmModel::load(gmm_path)?;
    let (names, set) = load_shapes(particles_dir, names)?;
    let volumes = load_volumes(volumes_dir, &names)?;
    let loadings: Vec<Vec<f64>> = space.project_set(&set)?.into_iter().map(|l| l.0).collect();
    if out.exists() {
        // Stale samples from a larger earlier run must not linger.
        fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    let options = AugmentOptions {
        count: cfg.count,
        seed,
        tps_lambda: cfg.tps_lambda,
        ..Default::default()
    };
    generate_augmented(&space, &gmm, &set, &loadings, &volumes, &options, out)?;
    files_under(out)
}

pub fn train_regressor_cmd(space_path: &Path, augmented: &Path, cfg: &TrainConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let space = ShapeSpace::load(space_path)?;
    let records = read_manifest(&augmented.join(MANIFEST_NAME))?;
    if records.is_empty() {
        return Err(Error::data(format!("{}: no augmented samples", augmented.display())));
    }
    let dataset = records
        .iter()
        .map(|r| Ok((read_metaimage(&augmented.join(&r.volume))?, Loadings(r.loadings.clone()))))
        .collect::<Result<Vec<_>>>()?;
    log::info!("training on {} samples for {} epochs", dataset.len(), cfg.epochs);
    let (model, curve) = train_regressor(&dataset, cfg, &space)?;
    let model_path = out.join(REGRESSOR);
    let loss_path = out.join(REGRESSOR_LOSS);
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    model.save(&model_path)?;
    write_loss_curve(&loss_path, &curve)?;
    Ok(vec![model_path, loss_path])
}

/// Template mesh with the correspondences it was built from.
pub struct Template {
    pub mesh: TriangleMesh,
    pub correspondences: Vec<[f64; 3]>,
}

impl Template {
    pub fn load(mesh: &Path, particles: &Path) -> Result<Self> {
        Ok(Self {
            mesh: read_obj(mesh)?,
            correspondences: read_particle_file(particles)?,
        })
    }

    pub fn warp(&self, subject: &[[f64; 3]]) -> Result<TriangleMesh> {
        warp_mesh_tps(&self.mesh, &self.correspondences, subject)
    }
}

/// Volume → loadings → correspondences (→ mesh). Writes `loadings.json`,
/// `particles/<name>.particles` and, with a template, `meshes/<name>.obj`.
pub fn predict_cmd(
    regressor: &Path,
    space_path: &Path,
    volumes: &[PathBuf],
    template: Option<&Template>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let model = RegressorModel::load(regressor)?;
    let space = ShapeSpace::load(space_path)?;
    if model.mode_count() != space.mode_count() {
        return Err(Error::data(format!(
            "regressor predicts {} loadings but the shape space has {} modes",
            model.mode_count(),
            space.mode_count()
        )));
    }
    let mut names = Vec::new();
    let mut all = Vec::new();
    let mut written = Vec::new();
    for sub in ["particles", "meshes"] {
        if sub == "particles" || template.is_some() {
            let d = out.join(sub);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    for path in volumes {
        let name = shape_name(path);
        let loadings = model.predict(&read_metaimage(path)?)?;
        let points = space.reconstruct_points(&loadings)?;
        let particles = out.join("particles").join(format!("{name}.particles"));
        write_particle_file(&particles, &points)?;
        written.push(particles);
        if let Some(t) = template {
            let mesh_path = out.join("meshes").join(format!("{name}.obj"));
            write_obj(&t.warp(&points)?, &mesh_path)?;
            written.push(mesh_path);
        }
        names.push(name);
        all.push(loadings);
    }
    let table = out.join(LOADINGS);
    LoadingsTable::new(names, all).save(&table)?;
    written.insert(0, table);
    Ok(written)
}

pub fn train_recurrence_cmd(loadings: &Path, labels: &Path, cfg: &TrainConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let table = LoadingsTable::load(loadings)?;
    let y = crate::data::labels_for(labels, &table.names)?;
    let (model, curve) = train_recurrence(&table.loadings, &y, cfg)?;
    let model_path = out.join(RECURRENCE);
    let loss_path = out.join(RECURRENCE_LOSS);
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    model.save(&model_path)?;
    write_loss_curve(&loss_path, &curve)?;
    Ok(vec![model_path, loss_path])
}

#[derive(Debug, Serialize)]
pub struct RecurrencePredictions {
    pub format_version: u32,
    pub names: Vec<String>,
    pub probabilities: Vec<f64>,
}

pub fn recurrence_probabilities(model: &RecurrenceModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    rows.iter().map(|l| predict_recurrence(model, &Loadings(l.clone()))).collect()
}

pub fn predict_recurrence_cmd(recurrence: &Path, loadings: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let model = RecurrenceModel::load(recurrence)?;
    let table = LoadingsTable::load(loadings)?;
    let probabilities = recurrence_probabilities(&model, &table.loadings)?;
    let path = out.join(RECURRENCE_PREDICTIONS);
    write_json(
        &path,
        &RecurrencePredictions {
            format_version: FORMAT_VERSION,
            names: table.names,
            probabilities,
        },
    )?;
    Ok(vec![path])
}

#[derive(Debug, Serialize)]
pub struct LoadingsReport {
    pub format_version: u32,
    pub names: Vec<String>,
    pub hotelling: HotellingResult,
    /// `1 − p_value`.
    pub confidence: f64,
    pub alpha: f64,
    pub verdict: String,
}

/// Hotelling T² between predicted and ground-truth loadings of the same shapes.
pub fn evaluate_loadings(predicted: &Path, truth: &Path, variant: HotellingVariant, out: &Path) -> Result<Vec<PathBuf>> {
    let pred = LoadingsTable::load(predicted)?;
    let truth = LoadingsTable::load(truth)?;
    let truth_rows = truth.rows_for(&pred.names)?;
    let result = match variant {
        HotellingVariant::Paired => hotelling_paired(&pred.loadings, &truth_rows)?,
        HotellingVariant::TwoSample => hotelling_two_sample(&pred.loadings, &truth_rows)?,
    };
    let verdict = if result.p_value < LOADINGS_ALPHA { "significant" } else { "not significant" };
    let path = out.join("loadings.json");
    write_json(
        &path,
        &LoadingsReport {
            format_version: FORMAT_VERSION,
            names: pred.names,
            confidence: result.confidence(),
            hotelling: result,
            alpha: LOADINGS_ALPHA,
            verdict: verdict.into(),
        },
    )?;
    Ok(vec![path])
}

#[derive(Debug, Serialize)]
pub struct PointsReport {
    pub format_version: u32,
    pub names: Vec<String>,
    pub per_shape_mean: Vec<f64>,
    pub points: BoxStats,
    pub shapes: BoxStats,
    pub threshold_mm: f64,
    pub fraction_below_threshold: f64,
    /// `errors[i][j]`, mm.
    pub errors: Vec<Vec<f64>>,
}

/// Per-point errors between predicted and true particle files matched by name.
pub fn evaluate_points(predicted_dir: &Path, truth_dir: &Path, threshold_mm: f64, out: &Path) -> Result<Vec<PathBuf>> {
    let (names, pred) = load_shapes(predicted_dir, None)?;
    let (_, truth) = load_shapes(truth_dir, Some(&names))?;
    let summary = point_errors(&pred, &truth, threshold_mm)?;
    let per_shape: Vec<BoxStats> = summary.errors.iter().map(|e| summarize(e)).collect::<Result<_>>()?;
    let mut groups: Vec<(&str, &BoxStats)> = names.iter().map(String::as_str).zip(&per_shape).collect();
    groups.push(("all_points", &summary.points));
    groups.push(("shape_means", &summary.shapes));
    let csv = out.join("points_boxplot.csv");
    write_file(&csv, boxplot_csv(groups).as_bytes())?;
    let report = out.join("points.json");
    write_json(
        &report,
        &PointsReport {
            format_version: FORMAT_VERSION,
            names,
            per_shape_mean: summary.per_shape_mean,
            points: summary.points,
            shapes: summary.shapes,
            threshold_mm,
            fraction_below_threshold: summary.fraction_below_threshold,
            errors: summary.errors,
        },
    )?;
    Ok(vec![report, csv])
}

#[derive(Debug, Serialize)]
pub struct SurfaceShapeReport {
    pub name: String,
    pub predicted_to_truth: BoxStats,
    pub truth_to_predicted: Option<BoxStats>,
    pub max_of_means: f64,
    pub hausdorff: f64,
}

#[derive(Debug, Serialize)]
pub struct SurfaceReport {
    pub format_version: u32,
    pub symmetric: bool,
    pub shapes: Vec<SurfaceShapeReport>,
    /// Over the per-shape mean predicted→truth distances.
    pub mean_distance: BoxStats,
}

/// Vertex-to-surface distances between meshes matched by name; writes one
/// per-vertex CSV per shape under `surface/`.
pub fn evaluate_surface(
    predicted: &[(String, TriangleMesh)],
    truth: &[(String, TriangleMesh)],
    symmetric: bool,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    if predicted.is_empty() {
        return Err(Error::data("no predicted meshes to evaluate"));
    }
    let mut written = Vec::new();
    let mut shapes = Vec::new();
    for (name, mesh) in predicted {
        let (_, reference) = truth
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::data(format!("no ground-truth mesh for shape {name}")))?;
        let d = surface_distance(mesh, reference, symmetric)?;
        let csv = out.join("surface").join(format!("{name}.csv"));
        write_file(&csv, d.to_csv().as_bytes())?;
        written.push(csv);
        shapes.push(SurfaceShapeReport {
            name: name.clone(),
            predicted_to_truth: d.a_to_b_summary,
            truth_to_predicted: d.b_to_a_summary,
            max_of_means: d.max_of_means(),
            hausdorff: d.hausdorff(),
        });
    }
    let means: Vec<f64> = shapes.iter().map(|s| s.predicted_to_truth.mean).collect();
    let report = out.join("surface.json");
    write_json(
        &report,
        &SurfaceReport {
            format_version: FORMAT_VERSION,
            symmetric,
            mean_distance: summarize(&means)?,
            shapes,
        },
    )?;
    written.insert(0, report);
    Ok(written)
}

/// Meshes `<name>.obj` from a directory, sorted by name.
pub fn load_meshes(dir: &Path) -> Result<Vec<(String, TriangleMesh)>> {
    let mut out = Vec::new();
    for path in files_under(dir)? {
        if path.extension().is_some_and(|e| e == "obj") {
            out.push((shape_name(&path), read_obj(&path)?));
        }
    }
    if out.is_empty() {
        return Err(Error::data(format!("{}: no .obj meshes", dir.display())));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct RecurrenceReport {
    pub format_version: u32,
    pub names: Vec<String>,
    pub truth_probabilities: Vec<f64>,
    pub predicted_probabilities: Vec<f64>,
    /// Truth minus predicted.
    pub differences: Vec<f64>,
    pub tost: EquivalenceResult,
    /// `1 − max(p_lower, p_upper)`.
    pub confidence: f64,
}

/// TOST on recurrence probabilities from ground-truth versus predicted
/// loadings, both through the same model.
pub fn evaluate_recurrence(recurrence: &Path, truth: &Path, predicted: &Path, cfg: &TostConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let model = RecurrenceModel::load(recurrence)?;
    let pred = LoadingsTable::load(predicted)?;
    let truth_rows = LoadingsTable::load(truth)?.rows_for(&pred.names)?;
    let p_truth = recurrence_probabilities(&model, &truth_rows)?;
    let p_pred = recurrence_probabilities(&model, &pred.loadings)?;
    let diffs: Vec<f64> = p_truth.iter().zip(&p_pred).map(|(a, b)| a - b).collect();
    let result = tost(&diffs, cfg.lower, cfg.upper, cfg.alpha)?;
    let path = out.join("recurrence.json");
    write_json(
        &path,
        &RecurrenceReport {
            format_version: FORMAT_VERSION,
            names: pred.names,
            truth_probabilities: p_truth,
            predicted_probabilities: p_pred,
            differences: diffs,
            confidence: 1.0 - result.p_lower.max(result.p_upper),
            tost: result,
        },
    )?;
    Ok(vec![path])
}
