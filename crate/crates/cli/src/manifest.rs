//! Run manifest written next to every set of artifacts.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

/// SHA-256 of the canonical JSON form (object keys sorted, no whitespace).
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let value = serde_json::to_value(cfg).expect("configuration serializes");
    sha256_hex(value.to_string().as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub fraxolve: &'static str,
    pub fraxolve_cli: &'static str,
    pub target: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub config: Value,
    pub versions: Versions,
    pub threads: usize,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub restriction: Option<Value>,
    pub max_principle: Option<Value>,
    pub range_ok: Option<bool>,
    pub warnings: Vec<String>,
    pub results: Value,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, cfg: &T, hash: &str) -> Self {
        Manifest {
            command: command.to_string(),
            config_hash: hash.to_string(),
            config: serde_json::to_value(cfg).expect("configuration serializes"),
            versions: Versions {
                fraxolve: fraxolve::VERSION,
                fraxolve_cli: env!("CARGO_PKG_VERSION"),
                target: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            },
            threads: rayon::current_num_threads(),
            timings: BTreeMap::new(),
            restriction: None,
            max_principle: None,
            range_ok: None,
            warnings: Vec::new(),
            results: Value::Null,
            artifacts: Vec::new(),
        }
    }

    pub fn timing(&mut self, phase: &str, seconds: f64) {
        self.timings.insert(phase.to_string(), seconds);
    }

    /// Writes `dir/name` and records it.
    pub fn add_artifact(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), bytes)?;
        self.artifacts.push(Artifact {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            config_hash: self.config_hash.clone(),
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text + "\n")
    }
}
