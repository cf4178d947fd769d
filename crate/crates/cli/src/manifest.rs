use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// What a command read, what it wrote, and how long it took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_path: PathBuf,
    /// SHA-256 of the resolved config (after overrides), serialized compactly.
    pub config_sha256: String,
    pub seed: u64,
    /// Output path relative to the out dir → SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
}

/// Writes files under one root, each via a temporary sibling and a rename,
/// and remembers their checksums.
pub struct OutputDir {
    root: PathBuf,
    outputs: BTreeMap<String, String>,
    started: Instant,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let err = |source| CliError::Output {
        path: path.to_owned(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(err)?;
    fs::rename(&tmp, path).map_err(err)
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            outputs: BTreeMap::new(),
            started: Instant::now(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `rel` uses `/` separators and stays inside the root.
    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let bytes = contents.as_ref();
        let path = self.root.join(rel);
        write_atomic(&path, bytes)?;
        log::info!("wrote {}", path.display());
        self.outputs.insert(rel.to_owned(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn finish(
        self,
        command: &str,
        config_path: &Path,
        resolved_config: &str,
        seed: u64,
    ) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_path: config_path.to_owned(),
            config_sha256: sha256_hex(resolved_config.as_bytes()),
            seed,
            outputs: self.outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(tierflow::Error::from)? + "\n";
        write_atomic(&self.root.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(manifest)
    }
}
