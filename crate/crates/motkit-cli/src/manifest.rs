//! Run manifests embedded in every output file, so a result can be traced
//! back to its exact inputs and settings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// sha256 of each input, keyed by role (`mu`, `nu`, `tmaps`, ...).
    pub input_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub tolerances: BTreeMap<String, f64>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            input_hashes: BTreeMap::new(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            tolerances: BTreeMap::new(),
            timestamp: OffsetDateTime::now_utc()
                .format(&Rfc3339)
                .unwrap_or_else(|_| "unknown".to_string()),
        }
    }

    pub fn with_input(mut self, role: &str, content: &str) -> Self {
        let digest = Sha256::digest(content.as_bytes());
        self.input_hashes
            .insert(role.to_string(), format!("sha256:{}", hex::encode(digest)));
        self
    }

    pub fn with_tolerance(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }
}
