//! Record of one CLI run, enough to repeat it.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use rodsim_fling::train::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Start time, seconds since the Unix epoch.
    pub started_unix: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Full command line.
    pub command: Vec<String>,
    /// Effective configuration after defaults and overrides.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub threads: usize,
    pub outputs: Vec<PathBuf>,
    pub timings: Timings,
}

/// Collects outputs while a command runs.
pub struct ManifestBuilder {
    command: Vec<String>,
    started_unix: f64,
    started: Instant,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn start(command: Vec<String>) -> Self {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        Self {
            command,
            started_unix,
            started: Instant::now(),
            outputs: Vec::new(),
        }
    }

    pub fn output(&mut self, path: &Path) {
        if !self.outputs.iter().any(|p| p == path) {
            self.outputs.push(path.to_path_buf());
        }
    }

    pub fn finish(self, config: serde_json::Value, seed: Option<u64>) -> RunManifest {
        RunManifest {
            command: self.command,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            outputs: self.outputs,
            timings: Timings {
                started_unix: self.started_unix,
                wall_seconds: self.started.elapsed().as_secs_f64(),
            },
        }
    }
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        write_atomic(path, text.as_bytes()).map_err(|e| std::io::Error::other(e.to_string()))
    }
}
