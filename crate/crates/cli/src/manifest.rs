use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cisurvey_core::analysis::REPORT_SCHEMA_VERSION;
use cisurvey_core::questionnaire::SURVEY_SCHEMA_VERSION;

pub const MANIFEST_SCHEMA_VERSION: &str = "cisurvey.manifest.v1";
pub const RESPONSES_SCHEMA_VERSION: &str = "cisurvey.responses.v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// What was run, on which inputs, producing which files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// Command-line parameters, as given.
    pub parameters: BTreeMap<String, String>,
    /// Input paths with content digests.
    pub inputs: Vec<OutputFile>,
    pub seed: Option<u64>,
    pub output: String,
    pub schema_versions: BTreeMap<String, String>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    pub created_at: u64,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(command: &str, output: &Path, seed: Option<u64>) -> Self {
        RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION.to_string(),
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            seed,
            output: output.display().to_string(),
            schema_versions: [
                ("survey", SURVEY_SCHEMA_VERSION),
                ("responses", RESPONSES_SCHEMA_VERSION),
                ("report", REPORT_SCHEMA_VERSION),
                ("manifest", MANIFEST_SCHEMA_VERSION),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
            created_at: created_at(),
            outputs: Vec::new(),
        }
    }

    pub fn parameter(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(OutputFile { path: path.display().to_string(), sha256: sha256_hex(bytes) });
    }

    pub fn output(&mut self, relative: &str, bytes: &[u8]) {
        self.outputs.push(OutputFile { path: relative.to_string(), sha256: sha256_hex(bytes) });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_json())
    }
}

fn created_at() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
