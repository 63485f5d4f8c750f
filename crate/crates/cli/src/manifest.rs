//! Run manifests written next to every output.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::output::write_atomic;
use crate::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    /// SHA-256 of the scenario file bytes.
    pub scenario_sha256: String,
    pub seeds: Vec<u64>,
    pub version: String,
    pub duration_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, scenario_bytes: &[u8], seeds: Vec<u64>, duration: Duration, outputs: Vec<PathBuf>) -> Self {
        Self {
            command,
            scenario_sha256: scenario_hash(scenario_bytes),
            seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: duration.as_secs_f64(),
            outputs,
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(path, format!("{json}\n").as_bytes())
    }
}

pub fn scenario_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `out.csv` gets `out.csv.manifest.json`; a directory gets
/// `manifest.json` inside it.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            scenario_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sibling_manifest_name() {
        assert_eq!(manifest_path(Path::new("/tmp/x/aoi.csv")), PathBuf::from("/tmp/x/aoi.csv.manifest.json"));
    }
}
