use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_json;
use crate::pipeline::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub frames: usize,
    pub files: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
    pub error: String,
}

/// Run record: the effective config, what each stage did and a content
/// hash of every file written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn file(&self, rel: &str) -> Option<&FileRecord> {
        self.files.iter().find(|f| f.path == rel)
    }
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Output directory bookkeeping shared by the stages.
#[derive(Debug)]
pub(crate) struct RunDir {
    root: PathBuf,
    files: BTreeMap<String, FileRecord>,
    stage_files: usize,
}

impl RunDir {
    pub fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::Io {
            path: root.to_path_buf(),
            source: e,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
            stage_files: 0,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Hashes a file just written under the root.
    pub fn track(&mut self, path: &Path) -> Result<()> {
        let rel = path
            .strip_prefix(&self.root)
            .map_err(|_| Error::contract(format!("{} is outside the output directory", path.display())))?;
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let (sha256, bytes) = sha256_file(path)?;
        if self.files.insert(rel.clone(), FileRecord { path: rel, sha256, bytes }).is_none() {
            self.stage_files += 1;
        }
        Ok(())
    }

    pub fn take_stage_files(&mut self) -> usize {
        std::mem::take(&mut self.stage_files)
    }

    pub fn finish(self, config: &ExperimentConfig, stages: Vec<StageRecord>, failure: Option<Failure>) -> Result<Manifest> {
        let manifest = Manifest {
            config: config.clone(),
            stages,
            files: self.files.into_values().collect(),
            failure,
        };
        write_json(&self.root.join(Manifest::FILE_NAME), &manifest)?;
        Ok(manifest)
    }
}
