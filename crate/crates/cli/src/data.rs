//! On-disk dataset layout and small tabular artifacts.
//!
//! A dataset directory holds `particles/<name>.particles`,
//! `volumes/<name>.mhd`, optionally `meshes/<name>.obj`, `labels.csv`
//! (`name,label`) and a template (`template.obj` + `template.particles`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use voxshape_core::mesh::write_obj;
use voxshape_core::shape::{list_particle_files, write_particle_file, Loadings};
use voxshape_core::volume::synth::SyntheticPopulation;
use voxshape_core::volume::write_metaimage;
use voxshape_core::{Error, Result, FORMAT_VERSION};

/// Vertex count of ground-truth meshes written for synthetic shapes.
pub const SYNTH_MESH_VERTICES: usize = 642;

/// Named loading vectors, one row per shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingsTable {
    pub format_version: u32,
    pub names: Vec<String>,
    pub loadings: Vec<Vec<f64>>,
}

impl LoadingsTable {
    pub fn new(names: Vec<String>, loadings: Vec<Loadings>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            names,
            loadings: loadings.into_iter().map(|l| l.0).collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let t: LoadingsTable = read_json(path)?;
        if t.format_version != FORMAT_VERSION || t.names.len() != t.loadings.len() {
            return Err(Error::format(path, "malformed loadings table"));
        }
        Ok(t)
    }

    /// Rows reordered to `names`; every name must be present.
    pub fn rows_for(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .map(|i| self.loadings[i].clone())
                    .ok_or_else(|| Error::data(format!("no loadings for shape {n}")))
            })
            .collect()
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<(String, bool)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some("name,label") {
        return Err(Error::format(path, "expected header `name,label`"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let (name, label) = line
                .split_once(',')
                .ok_or_else(|| Error::format(path, format!("line {}: expected `name,label`", i + 2)))?;
            let label = match label.trim() {
                "0" => false,
                "1" => true,
                other => return Err(Error::format(path, format!("line {}: label {other:?} is not 0 or 1", i + 2))),
            };
            Ok((name.trim().to_string(), label))
        })
        .collect()
}

pub fn format_labels(rows: &[(String, bool)]) -> String {
    let mut out = String::from("name,label\n");
    for (name, label) in rows {
        out.push_str(&format!("{name},{}\n", *label as u8));
    }
    out
}

/// Labels for `names`, in that order.
pub fn labels_for(path: &Path, names: &[String]) -> Result<Vec<bool>> {
    let rows = read_labels(path)?;
    names
        .iter()
        .map(|n| {
            rows.iter()
                .find(|(m, _)| m == n)
                .map(|&(_, l)| l)
                .ok_or_else(|| Error::data(format!("{}: no label for shape {n}", path.display())))
        })
        .collect()
}

/// Shape name from a file path: the file stem.
pub fn shape_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Particle files of a directory with their shape names, sorted by name.
pub fn particle_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let files = list_particle_files(dir)?;
    if files.is_empty() {
        return Err(Error::data(format!("{}: no .particles files", dir.display())));
    }
    Ok(files.into_iter().map(|p| (shape_name(&p), p)).collect())
}

/// `<dir>/<name>.<ext>`, which must exist.
pub fn existing(dir: &Path, name: &str, ext: &str) -> Result<PathBuf> {
    let p = dir.join(format!("{name}.{ext}"));
    if !p.is_file() {
        return Err(Error::data(format!("missing {}", p.display())));
    }
    Ok(p)
}

/// Writes a synthetic population in the dataset layout; returns shape names.
pub fn write_synthetic(pop: &SyntheticPopulation, dir: &Path) -> Result<Vec<String>> {
    let n = pop.correspondences.shape_count();
    let width = n.to_string().len().max(5);
    let names: Vec<String> = (0..n).map(|i| format!("shape_{i:0width$}")).collect();
    for (i, name) in names.iter().enumerate() {
        write_particle_file_in(&dir.join("particles"), name, pop.correspondences.shape(i))?;
        let vol = dir.join("volumes").join(format!("{name}.mhd"));
        create_parent(&vol)?;
        write_metaimage(&pop.volumes[i], &vol)?;
        let mesh = pop.model.surface_mesh(&pop.latents[i], SYNTH_MESH_VERTICES)?;
        let obj = dir.join("meshes").join(format!("{name}.obj"));
        create_parent(&obj)?;
        write_obj(&mesh, &obj)?;
    }
    let mean = pop.model.mean_latent();
    write_obj(&pop.model.surface_mesh(&mean, SYNTH_MESH_VERTICES)?, &dir.join("template.obj"))?;
    write_particle_file(&dir.join("template.particles"), &pop.model.landmarks(&mean))?;
    let labels: Vec<(String, bool)> = names.iter().cloned().zip(pop.labels.iter().copied()).collect();
    write_file(&dir.join("labels.csv"), format_labels(&labels).as_bytes())?;
    let mut latents = String::from("name");
    for j in 0..pop.latents.first().map_or(0, Vec::len) {
        latents.push_str(&format!(",z{j}"));
    }
    latents.push('\n');
    for (name, z) in names.iter().zip(&pop.latents) {
        latents.push_str(name);
        for v in z {
            latents.push_str(&format!(",{v:.16e}"));
        }
        latents.push('\n');
    }
    write_file(&dir.join("latents.csv"), latents.as_bytes())?;
    Ok(names)
}

fn create_parent(path: &Path) -> Result<()> {
    let dir = path.parent().expect("joined path has a parent");
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_particle_file_in(dir: &Path, name: &str, points: &[[f64; 3]]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_particle_file(&dir.join(format!("{name}.particles")), points)
}
