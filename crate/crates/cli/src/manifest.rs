//! Run manifests: one JSON file per command invocation recording the
//! resolved configuration, the seed and SHA-256 digests of every file read
//! or written.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    pub fn hash(path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    /// Command-specific figures such as discard rates.
    pub details: serde_json::Value,
    pub duration_secs: f64,
}

/// Collects artifacts while a command runs.
pub struct ManifestBuilder {
    command: String,
    config: RunConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    details: serde_json::Map<String, serde_json::Value>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            details: serde_json::Map::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) -> anyhow::Result<()> {
        self.details.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    /// Hash the artifacts and write the manifest to `path`.
    pub fn write(self, path: &Path) -> anyhow::Result<RunManifest> {
        let hash_all = |ps: &[PathBuf]| ps.iter().map(|p| Artifact::hash(p)).collect::<anyhow::Result<Vec<_>>>();
        let m = RunManifest {
            format_version: MANIFEST_VERSION,
            command: self.command,
            seed: self.config.seed,
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
            config: self.config,
            details: serde_json::Value::Object(self.details),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&m)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(m)
    }
}

/// Manifest path next to a primary output: `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Parse and check a manifest file.
pub fn read_manifest(path: &Path) -> anyhow::Result<RunManifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    anyhow::ensure!(m.format_version == MANIFEST_VERSION, "unsupported manifest version {}", m.format_version);
    anyhow::ensure!(m.seed == m.config.seed, "manifest seed differs from its config");
    for a in m.inputs.iter().chain(&m.outputs) {
        anyhow::ensure!(
            a.sha256.len() == 64 && a.sha256.bytes().all(|b| b.is_ascii_hexdigit()),
            "bad digest for {}",
            a.path
        );
    }
    Ok(m)
}
