use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::config::RunConfig;

pub const MANIFEST_NAME: &str = "run_manifest.json";

/// One emitted file. `path` is relative to the run directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRow {
    pub stage: String,
    pub inputs: Vec<String>,
    pub path: String,
    pub sha256: String,
}

/// Record of a run. Lists every file in the run directory except itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub created_unix_s: u64,
    pub config: RunConfig,
    pub artifacts: Vec<ArtifactRow>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn rel_string(root: &Path, path: &Path) -> Result<String> {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
    if parts.is_empty() {
        return Err(Error::Pipeline(format!("artifact path {} is the run directory", path.display())));
    }
    Ok(parts.join("/"))
}

/// Collects artifact rows from worker results; written once at the end.
#[derive(Debug)]
pub struct ManifestBuilder {
    root: PathBuf,
    rows: Vec<ArtifactRow>,
}

impl ManifestBuilder {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            rows: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Digests `path` (absolute or relative to the root) and records it.
    pub fn record(&mut self, stage: &str, inputs: &[String], path: &Path) -> Result<()> {
        let full = if path.is_absolute() { path.to_path_buf() } else { self.root.join(path) };
        self.rows.push(ArtifactRow {
            stage: stage.into(),
            inputs: inputs.to_vec(),
            path: rel_string(&self.root, &full)?,
            sha256: sha256_file(&full)?,
        });
        Ok(())
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ArtifactRow>) {
        self.rows.extend(rows);
    }

    /// Sorts by path and rejects duplicates.
    pub fn finish(mut self, command: &str, config: &RunConfig) -> Result<RunManifest> {
        self.rows.sort_by(|a, b| a.path.cmp(&b.path));
        if let Some(w) = self.rows.windows(2).find(|w| w[0].path == w[1].path) {
            return Err(Error::Pipeline(format!("artifact {} recorded twice", w[0].path)));
        }
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            created_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            config: config.canonical(),
            artifacts: self.rows,
        })
    }
}

/// Digest row for a file written by a worker, merged later by the single
/// manifest writer.
pub fn artifact_row(root: &Path, stage: &str, inputs: &[String], path: &Path) -> Result<ArtifactRow> {
    let mut b = ManifestBuilder::new(root);
    b.record(stage, inputs, path)?;
    Ok(b.rows.pop().expect("one row"))
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let mut json = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "run manifest".into(),
            source,
        })?;
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: format!("run manifest {}", path.display()),
            source,
        })
    }

    /// Paths that are missing or whose bytes no longer match their digest.
    pub fn dangling(&self, dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|a| sha256_file(&dir.join(&a.path)).map_or(true, |d| d != a.sha256))
            .map(|a| a.path.clone())
            .collect()
    }
}
