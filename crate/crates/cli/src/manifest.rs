//! `manifest.json`: what each command wrote, with hashes and seeds.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub seeds: BTreeMap<String, u64>,
    pub config_sha256: Option<String>,
    pub data_fingerprint: Option<String>,
    /// Path relative to the run directory, mapped to its SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    fn fresh() -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: deltaiss::synthesis::SOLVER_VERSION.to_string(),
            runs: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Option<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
        serde_json::from_str(&text).ok()
    }
}

/// Appends `record` to the run directory's manifest, hashing its artifacts.
pub fn append(dir: &Path, mut record: RunRecord, artifacts: &[&str]) -> Result<(), CliError> {
    for rel in artifacts {
        let bytes = fs::read(dir.join(rel))?;
        record.artifacts.insert((*rel).to_string(), sha256_hex(&bytes));
    }
    let mut m = Manifest::load(dir).unwrap_or_else(Manifest::fresh);
    m.runs.push(record);
    let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}
