//! Output directory, artifact bookkeeping and the run manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clab::digest::{digest_bytes, digest_json};
use serde::Serialize;

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::CliError;

pub const DEFAULT_OUT: &str = "clab-out";

/// `--out` wins, then the config, then `CLAB_OUT`, then [`DEFAULT_OUT`].
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig, env: Option<&str>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output.directory.as_deref().map(PathBuf::from))
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub struct Outputs {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

/// Every JSON report is wrapped with its schema version and kind.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    report: &'a T,
}

impl Outputs {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { dir, artifacts: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(Artifact { path: name.to_string(), sha256: digest_bytes(bytes), bytes: bytes.len() });
        Ok(())
    }

    /// Render into memory with a core writer, then store.
    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> clab::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_report<T: Serialize>(&mut self, name: &str, kind: &str, report: &T) -> Result<(), CliError> {
        let env = Envelope { schema_version: SCHEMA_VERSION, kind, report };
        let mut text = serde_json::to_string_pretty(&env).map_err(clab::Error::from)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Write `manifest.json`. The timestamp is the only field left out of
    /// the digest, so reruns of the same configuration share a digest.
    pub fn finish(self, run: RunInfo<'_>) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Body<'a> {
            schema_version: u32,
            tool: &'static str,
            version: &'static str,
            command: &'a str,
            config: &'a ExperimentConfig,
            config_digest: String,
            seed: u64,
            overrides: &'a [String],
            backend: &'static str,
            workers: usize,
            artifacts: &'a [Artifact],
        }
        #[derive(Serialize)]
        struct Manifest<'a> {
            #[serde(flatten)]
            body: &'a Body<'a>,
            digest: String,
            created_unix: u64,
        }
        let body = Body {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: run.command,
            config: run.config,
            config_digest: digest_json(run.config),
            seed: run.config.experiment.seed,
            overrides: run.overrides,
            backend: if clab::par::is_parallel() { "rayon" } else { "sequential" },
            workers: run.config.experiment.workers,
            artifacts: &self.artifacts,
        };
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let manifest = Manifest { digest: digest_json(&body), body: &body, created_unix };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(clab::Error::from)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

pub struct RunInfo<'a> {
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub overrides: &'a [String],
}
