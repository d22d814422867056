use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use spun4d::config::Config;
use spun4d::Result;

/// Written next to every output set.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the effective configuration as JSON.
    pub config_hash: String,
    pub tool_version: String,
    pub tolerances: Config,
    pub elapsed_ms: u128,
    pub outputs: Vec<PathBuf>,
    /// Non-empty when something was skipped or failed.
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification_passed: Option<bool>,
}

pub struct Recorder {
    pub manifest: RunManifest,
    started: Instant,
}

pub fn config_hash(c: &Config) -> String {
    let json = serde_json::to_vec(c).expect("config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

impl Recorder {
    pub fn new(argv: &[String], config: &Config) -> Self {
        Recorder {
            manifest: RunManifest {
                command_line: argv.to_vec(),
                config_hash: config_hash(config),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                tolerances: config.clone(),
                elapsed_ms: 0,
                outputs: Vec::new(),
                warnings: Vec::new(),
                verification_passed: None,
            },
            started: Instant::now(),
        }
    }

    pub fn output(&mut self, p: &Path) {
        self.manifest.outputs.push(p.to_path_buf());
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        eprintln!("warning: {w}");
        self.manifest.warnings.push(w);
    }

    /// Write `<last output>.manifest.json` (or `<dir>/manifest.json` for a
    /// directory); nothing when no file was produced.
    pub fn finish(mut self) -> Result<Option<PathBuf>> {
        self.manifest.elapsed_ms = self.started.elapsed().as_millis();
        let Some(first) = self.manifest.outputs.last() else { return Ok(None) };
        let path = if first.is_dir() {
            first.join("manifest.json")
        } else {
            let mut name = first.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            first.with_file_name(name)
        };
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(Some(path))
    }
}
