//! Experiment reports: CSV with a `#`-prefixed metadata header.
//!
//! Reports carry only deterministic content so that identical configs give
//! byte-identical files; timing goes to the caller's log instead.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub experiment: String,
    /// Fully resolved configuration.
    pub config: serde_json::Value,
    pub seed: u64,
    /// Extra `key: value` header lines, in insertion order.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl SimReport {
    pub fn new(experiment: &str, config: &impl Serialize, seed: u64, columns: &[&str]) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(Self {
            experiment: experiment.to_string(),
            config,
            seed,
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_row(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::SizeMismatch {
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical config JSON.
    pub fn param_hash(&self) -> String {
        // serde_json objects are key-sorted, so the encoding is canonical
        let digest = Sha256::digest(self.config.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# experiment: {}\n", self.experiment));
        out.push_str(&format!("# seed: {}\n", self.seed));
        out.push_str(&format!("# param_hash: {}\n", self.param_hash()));
        out.push_str(&format!("# config: {}\n", self.config));
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}
