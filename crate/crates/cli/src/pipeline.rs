//! `pipeline`: every stage in order under one output directory.
//!
//! Each stage has a key: the digest of its settings and of everything it
//! reads. A stage whose key and output digests match the run manifest is
//! skipped, so an interrupted run resumes where it stopped.
//!
//! Layout: `data/` (synthesized inputs), `shape_space/`, `gmm/`,
//! `augmented/`, `regressor/`, `predict/`, `recurrence/`, `reports/` and
//! `run_manifest.json`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use voxshape_core::mesh::{read_obj, TriangleMesh};
use voxshape_core::{Error, Result};

use crate::commands::{self, Template};
use crate::config::PipelineConfig;
use crate::data::{existing, particle_files, read_json};
use crate::manifest::{sha256_file, sha256_text, RunManifest, RUN_MANIFEST};
use crate::CliError;

/// Where the pipeline reads its data from.
#[derive(Debug, Clone)]
struct Inputs {
    particles: PathBuf,
    volumes: PathBuf,
    labels: Option<PathBuf>,
    meshes: Option<PathBuf>,
    template: Option<(PathBuf, PathBuf)>,
}

struct Runner<'a> {
    out: &'a Path,
    manifest: RunManifest,
}

impl Runner<'_> {
    fn stage(&mut self, name: &str, key: Value, run: impl FnOnce() -> Result<Vec<PathBuf>>) -> Result<()> {
        let key = sha256_text(&key.to_string());
        if self.manifest.is_complete(self.out, name, &key) {
            log::info!("{name}: up to date, skipped");
            return Ok(());
        }
        log::info!("{name}: running");
        let outputs = run()?;
        self.manifest.record(self.out, name, &key, &outputs)?;
        self.manifest.save(self.out)
    }

    fn upstream(&self, names: &[&str]) -> String {
        self.manifest.upstream_digest(names)
    }
}

/// Digest of file contents, keyed by file name. MetaImage headers bring
/// their `.raw` payload along.
fn digest_files(files: &[PathBuf]) -> Result<String> {
    let mut text = String::new();
    for f in files {
        let mut parts = vec![f.clone()];
        if f.extension().is_some_and(|e| e == "mhd") {
            let raw = f.with_extension("raw");
            if raw.is_file() {
                parts.push(raw);
            }
        }
        for p in parts {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let _ = writeln!(text, "{name}:{}", sha256_file(&p)?);
        }
    }
    Ok(sha256_text(&text))
}

fn resolve_inputs(cfg: &PipelineConfig, out: &Path) -> Result<(Inputs, bool), CliError> {
    let p = &cfg.paths;
    let synthesize = p.particles_dir.is_none() && p.volumes_dir.is_none();
    if synthesize {
        let data = out.join("data");
        return Ok((
            Inputs {
                particles: data.join("particles"),
                volumes: data.join("volumes"),
                labels: Some(data.join("labels.csv")),
                meshes: Some(data.join("meshes")),
                template: Some((data.join("template.obj"), data.join("template.particles"))),
            },
            true,
        ));
    }
    let (Some(particles), Some(volumes)) = (&p.particles_dir, &p.volumes_dir) else {
        return Err(CliError::Config(
            "paths.particles_dir and paths.volumes_dir must be given together (or both omitted to synthesize)".into(),
        ));
    };
    let template = match (&p.template_mesh, &p.template_particles) {
        (Some(m), Some(t)) => Some((m.clone(), t.clone())),
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "paths.template_mesh and paths.template_particles must be given together".into(),
            ))
        }
    };
    Ok((
        Inputs {
            particles: particles.clone(),
            volumes: volumes.clone(),
            labels: p.labels.clone(),
            meshes: p.meshes_dir.clone(),
            template,
        },
        false,
    ))
}

/// Runs (or resumes) every stage; returns a short text summary.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<String, CliError> {
    let out = cfg.paths.output_dir.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut runner = Runner {
        out,
        manifest: RunManifest::open(out, cfg.snapshot()),
    };
    let (inputs, synthesize) = resolve_inputs(cfg, out)?;

    if synthesize {
        let mut spec = cfg.synth.clone();
        spec.seed = cfg.seed;
        let data = out.join("data");
        runner.stage("synth", json!({ "synth": spec }), || {
            if data.exists() {
                std::fs::remove_dir_all(&data).map_err(|e| Error::io(&data, e))?;
            }
            commands::synth(&spec, &data)
        })?;
    }

    // Split in sorted name order.
    let all = particle_files(&inputs.particles)?;
    let (n_train, n_hold) = (cfg.split.train_count, cfg.split.holdout_count);
    if n_train + n_hold > all.len() {
        return Err(Error::data(format!(
            "{}: {} shapes, but the split needs {n_train} training + {n_hold} held-out",
            inputs.particles.display(),
            all.len()
        ))
        .into());
    }
    let train: Vec<String> = all[..n_train].iter().map(|(n, _)| n.clone()).collect();
    let holdout: Vec<String> = all[n_train..n_train + n_hold].iter().map(|(n, _)| n.clone()).collect();
    let train_particles = digest_files(&all[..n_train].iter().map(|(_, p)| p.clone()).collect::<Vec<_>>())?;
    let holdout_particles = digest_files(&all[n_train..n_train + n_hold].iter().map(|(_, p)| p.clone()).collect::<Vec<_>>())?;
    let volume_paths = |names: &[String]| -> Result<Vec<PathBuf>> {
        names.iter().map(|n| existing(&inputs.volumes, n, "mhd")).collect()
    };
    let train_volumes = digest_files(&volume_paths(&train)?)?;
    let holdout_volume_files = volume_paths(&holdout)?;
    let holdout_volumes = digest_files(&holdout_volume_files)?;

    let ss_dir = out.join("shape_space");
    let space_path = ss_dir.join(commands::SHAPE_SPACE);
    let train_loadings = ss_dir.join(commands::LOADINGS);
    let holdout_loadings = ss_dir.join("holdout_loadings.json");
    runner.stage(
        "shape_space",
        json!({
            "variance_threshold": cfg.variance_threshold,
            "train": train, "train_particles": train_particles,
            "holdout": holdout, "holdout_particles": holdout_particles,
        }),
        || {
            let mut written = commands::fit_shape_space_cmd(&inputs.particles, Some(&train), cfg.variance_threshold, &ss_dir)?;
            let space = voxshape_core::shape::ShapeSpace::load(&space_path)?;
            written.extend(commands::project_cmd(&space, &inputs.particles, Some(&holdout), &holdout_loadings)?);
            Ok(written)
        },
    )?;

    let gmm_dir = out.join("gmm");
    let gmm_path = gmm_dir.join(commands::GMM);
    runner.stage(
        "gmm",
        json!({ "gmm": cfg.gmm, "seed": cfg.seed, "upstream": runner.upstream(&["shape_space"]) }),
        || commands::fit_gmm_cmd(&train_loadings, &cfg.gmm, cfg.seed, &gmm_dir),
    )?;

    let aug_dir = out.join("augmented");
    runner.stage(
        "augment",
        json!({
            "augment": cfg.augment, "seed": cfg.seed, "train_volumes": train_volumes,
            "upstream": runner.upstream(&["shape_space", "gmm"]),
        }),
        || {
            commands::augment_cmd(
                &space_path,
                &gmm_path,
                &inputs.particles,
                &inputs.volumes,
                Some(&train),
                &cfg.augment,
                cfg.seed,
                &aug_dir,
            )
        },
    )?;

    let reg_dir = out.join("regressor");
    let reg_path = reg_dir.join(commands::REGRESSOR);
    let train_cfg = cfg.train.with_seed(cfg.seed);
    runner.stage(
        "regressor",
        json!({ "train": train_cfg, "upstream": runner.upstream(&["shape_space", "augment"]) }),
        || commands::train_regressor_cmd(&space_path, &aug_dir, &train_cfg, &reg_dir),
    )?;

    let template = match &inputs.template {
        Some((m, p)) => Some(Template::load(m, p)?),
        None => {
            log::warn!("no template mesh: meshes are not predicted and surface evaluation is skipped");
            None
        }
    };
    let template_digest = match &inputs.template {
        Some((m, p)) => Some(digest_files(&[m.clone(), p.clone()])?),
        None => None,
    };
    let pred_dir = out.join("predict");
    let pred_loadings = pred_dir.join(commands::LOADINGS);
    runner.stage(
        "predict",
        json!({
            "holdout_volumes": holdout_volumes, "template": template_digest,
            "upstream": runner.upstream(&["shape_space", "regressor"]),
        }),
        || {
            if pred_dir.exists() {
                std::fs::remove_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
            }
            commands::predict_cmd(&reg_path, &space_path, &holdout_volume_files, template.as_ref(), &pred_dir)
        },
    )?;

    let rec_dir = out.join("recurrence");
    let rec_path = rec_dir.join(commands::RECURRENCE);
    let rec_cfg = cfg.recurrence.with_seed(cfg.seed);
    if let Some(labels) = &inputs.labels {
        let labels_digest = digest_files(std::slice::from_ref(labels))?;
        runner.stage(
            "recurrence",
            json!({ "train": rec_cfg, "labels": labels_digest, "upstream": runner.upstream(&["shape_space"]) }),
            || commands::train_recurrence_cmd(&train_loadings, labels, &rec_cfg, &rec_dir),
        )?;
    } else {
        log::warn!("no labels: recurrence model and its evaluation are skipped");
    }

    let reports = out.join("reports");
    runner.stage(
        "evaluate_loadings",
        json!({ "hotelling": cfg.hotelling, "upstream": runner.upstream(&["shape_space", "predict"]) }),
        || commands::evaluate_loadings(&pred_loadings, &holdout_loadings, cfg.hotelling, &reports),
    )?;
    runner.stage(
        "evaluate_points",
        json!({
            "threshold_mm": cfg.voxel_spacing_mm, "holdout_particles": holdout_particles,
            "upstream": runner.upstream(&["predict"]),
        }),
        || commands::evaluate_points(&pred_dir.join("particles"), &inputs.particles, cfg.voxel_spacing_mm, &reports),
    )?;
    if let Some(t) = &template {
        let truth_digest = match &inputs.meshes {
            Some(dir) => Some(digest_files(&holdout.iter().map(|n| existing(dir, n, "obj")).collect::<Result<Vec<_>>>()?)?),
            None => None,
        };
        runner.stage(
            "evaluate_surface",
            json!({
                "symmetric": cfg.symmetric_surface_distance, "truth_meshes": truth_digest,
                "holdout_particles": holdout_particles, "upstream": runner.upstream(&["predict"]),
            }),
            || {
                let predicted = commands::load_meshes(&pred_dir.join("meshes"))?;
                let truth = truth_meshes(&holdout, &inputs, t)?;
                commands::evaluate_surface(&predicted, &truth, cfg.symmetric_surface_distance, &reports)
            },
        )?;
    }
    if inputs.labels.is_some() {
        runner.stage(
            "evaluate_recurrence",
            json!({ "tost": cfg.tost, "upstream": runner.upstream(&["shape_space", "predict", "recurrence"]) }),
            || commands::evaluate_recurrence(&rec_path, &holdout_loadings, &pred_loadings, &cfg.tost, &reports),
        )?;
    }

    Ok(summary(out, &reports)?)
}

/// Ground-truth meshes of the held-out shapes: from the meshes directory,
/// or the template warped onto the true correspondences.
fn truth_meshes(names: &[String], inputs: &Inputs, template: &Template) -> Result<Vec<(String, TriangleMesh)>> {
    names
        .iter()
        .map(|n| {
            let mesh = match &inputs.meshes {
                Some(dir) => read_obj(&existing(dir, n, "obj")?)?,
                None => {
                    let points = voxshape_core::shape::read_particle_file(&existing(&inputs.particles, n, "particles")?)?;
                    template.warp(&points)?
                }
            };
            Ok((n.clone(), mesh))
        })
        .collect()
}

fn summary(out: &Path, reports: &Path) -> Result<String> {
    let mut s = String::new();
    let num = |v: &Value, path: &[&str]| -> f64 {
        path.iter().fold(v, |v, k| &v[*k]).as_f64().unwrap_or(f64::NAN)
    };
    let space: Value = read_json(&out.join("shape_space").join(commands::SHAPE_SPACE))?;
    let _ = writeln!(s, "shape space: {} modes", space["eigenvalues"].as_array().map_or(0, Vec::len));
    let sel: Value = read_json(&out.join("gmm").join(commands::GMM_SELECTION))?;
    let _ = writeln!(s, "gmm: {} components by BIC", sel["selected_k"]);
    let l: Value = read_json(&reports.join("loadings.json"))?;
    let _ = writeln!(
        s,
        "loadings: T² {:.4}, p_value {:.4}, confidence (1 - p) {:.4}, {}",
        num(&l, &["hotelling", "t_squared"]),
        num(&l, &["hotelling", "p_value"]),
        num(&l, &["confidence"]),
        l["verdict"].as_str().unwrap_or("")
    );
    let p: Value = read_json(&reports.join("points.json"))?;
    let _ = writeln!(
        s,
        "points: mean error {:.4} mm (per-shape median {:.4} mm), {:.3} of shapes below {} mm",
        num(&p, &["points", "mean"]),
        num(&p, &["shapes", "median"]),
        num(&p, &["fraction_below_threshold"]),
        num(&p, &["threshold_mm"])
    );
    if let Ok(v) = read_json::<Value>(&reports.join("surface.json")) {
        let _ = writeln!(s, "surface: mean vertex-to-surface distance {:.4} mm", num(&v, &["mean_distance", "mean"]));
    }
    if let Ok(v) = read_json::<Value>(&reports.join("recurrence.json")) {
        let _ = writeln!(
            s,
            "recurrence: mean difference {:.4}, p_lower {:.4}, p_upper {:.4}, equivalent {}",
            num(&v, &["tost", "mean_diff"]),
            num(&v, &["tost", "p_lower"]),
            num(&v, &["tost", "p_upper"]),
            v["tost"]["equivalent"]
        );
    }
    let _ = writeln!(s, "manifest: {}", out.join(RUN_MANIFEST).display());
    Ok(s)
}
