//! The run manifest: everything needed to reproduce and audit a run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ontosim_core::scenario::ScenarioDoc;
use ontosim_core::TestReport;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub app_version: String,
    pub scenario_name: String,
    pub scenario_source: String,
    /// Hash of the resolved scenario document (canonical JSON) after
    /// overrides; runs are comparable exactly when these match.
    pub scenario_sha256: String,
    pub resolved_scenario: ScenarioDoc,
    pub overrides: Vec<String>,
    pub master_seed: u64,
    /// RNG stream labels consumed by this run.
    pub rng_streams: Vec<String>,
    pub ontologies: Vec<String>,
    pub metrics: Vec<TestReport>,
    pub summaries: BTreeMap<String, f64>,
    /// Structured per-ontology reports (delocation record, flash counts...).
    pub reports: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<OutputFile>,
    pub timings_ms: BTreeMap<String, u64>,
    pub all_passed: bool,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

pub fn hash_file(path: &Path) -> anyhow::Result<OutputFile> {
    let bytes = fs::read(path)?;
    Ok(OutputFile {
        path: String::new(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}
