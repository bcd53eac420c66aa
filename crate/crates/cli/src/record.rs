//! The reproducibility record embedded in every JSON output.
//!
//! A record pins down everything needed to reproduce a run: the tool and its
//! version, the subcommand, a SHA-256 digest of every input file, the seed
//! when randomness is involved, and the effective settings. Nothing in it
//! depends on the clock, so two runs with the same inputs produce identical
//! records.

use crate::CommandError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Input path (as given on the command line) to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Effective settings after defaults, as a JSON object.
    pub settings: serde_json::Value,
}

impl RunRecord {
    pub fn new(command: &str) -> Self {
        Self {
            tool: "frictions".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: BTreeMap::new(),
            seed: None,
            settings: serde_json::Value::Null,
        }
    }

    /// Hashes `path` and files it under the path string as given, so the
    /// record reads the same way the command line did.
    pub fn add_input(&mut self, path: &Path) -> Result<(), CommandError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CommandError::Failed(format!("cannot read {}: {e}", path.display())))?;
        self.inputs
            .insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
