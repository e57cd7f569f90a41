//! Run manifest: the config snapshot plus every artifact a stage produced,
//! with SHA-256 digests. Paths are relative to the output directory and no
//! timestamps are stored, so identical runs give identical manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use voxshape_core::{Error, Result, FORMAT_VERSION};

use crate::data::{read_json, write_json};

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// Digest of the stage's settings and upstream artifacts.
    pub key: String,
    pub outputs: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub config: serde_json::Value,
    pub stages: Vec<StageRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sha256_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// `path` relative to `root`, with `/` separators.
pub fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

impl RunManifest {
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config,
            stages: Vec::new(),
        }
    }

    /// The manifest in `out_dir` if it was made with the same config,
    /// otherwise a fresh one.
    pub fn open(out_dir: &Path, config: serde_json::Value) -> Self {
        let path = out_dir.join(RUN_MANIFEST);
        match read_json::<RunManifest>(&path) {
            Ok(m) if m.format_version == FORMAT_VERSION && m.config == config => m,
            Ok(_) => {
                log::info!("{}: config changed, starting a fresh manifest", path.display());
                Self::new(config)
            }
            Err(_) => Self::new(config),
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Whether `name` already ran with `key` and its outputs are intact.
    pub fn is_complete(&self, out_dir: &Path, name: &str, key: &str) -> bool {
        let Some(stage) = self.stage(name) else {
            return false;
        };
        stage.key == key
            && stage
                .outputs
                .iter()
                .all(|a| sha256_file(&out_dir.join(&a.path)).is_ok_and(|d| d == a.sha256))
    }

    /// Records (or replaces) a stage, keeping stages in first-run order.
    pub fn record(&mut self, out_dir: &Path, name: &str, key: &str, outputs: &[PathBuf]) -> Result<()> {
        let mut records = Vec::with_capacity(outputs.len());
        for p in outputs {
            records.push(ArtifactRecord {
                path: relative(out_dir, p),
                sha256: sha256_file(p)?,
            });
        }
        let stage = StageRecord {
            name: name.into(),
            key: key.into(),
            outputs: records,
        };
        match self.stages.iter_mut().find(|s| s.name == name) {
            Some(s) => *s = stage,
            None => self.stages.push(stage),
        }
        Ok(())
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        write_json(&out_dir.join(RUN_MANIFEST), self)
    }

    /// Digest of every output of the named stages, for downstream keys.
    pub fn upstream_digest(&self, names: &[&str]) -> String {
        let mut text = String::new();
        for n in names {
            if let Some(s) = self.stage(n) {
                text.push_str(&s.name);
                for a in &s.outputs {
                    text.push_str(&a.path);
                    text.push_str(&a.sha256);
                }
            }
        }
        sha256_text(&text)
    }
}
