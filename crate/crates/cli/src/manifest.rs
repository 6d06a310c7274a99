//! Run manifest: config echo, seed, checksums and timings for every emitted
//! file, so any output can be reproduced byte-for-byte from the manifest.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<OutputRecord>,
    pub timings_ms: BTreeMap<String, u128>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, workers: usize, config_echo: BTreeMap<String, String>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            workers,
            config: config_echo,
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    /// Write `contents` under `dir/name`, recording size and checksum.
    pub fn write_output(&mut self, dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        self.outputs.push(OutputRecord {
            file: name.to_string(),
            bytes: contents.len(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(path)
    }

    pub fn record_timing(&mut self, what: &str, ms: u128) {
        self.timings_ms.insert(what.to_string(), ms);
    }

    /// Serialize the manifest itself to `dir/run_manifest.json`.
    pub fn finalize(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("run_manifest.json"), json)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(out, "{b:02x}").unwrap();
    }
    out
}

/// Format a float with 17 significant digits (round-trips f64).
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
