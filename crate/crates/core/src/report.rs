//! Machine-readable report envelope shared by every command.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Effective parameters, including defaults that were not given explicitly.
    pub parameters: Value,
    pub seed: Option<u64>,
    pub payload: Value,
}

impl ReportDocument {
    pub fn new<P: Serialize, T: Serialize>(
        command: &str,
        parameters: &P,
        seed: Option<u64>,
        payload: &T,
    ) -> serde_json::Result<Self> {
        Ok(Self {
            tool: "atr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            parameters: serde_json::to_value(parameters)?,
            seed,
            payload: serde_json::to_value(payload)?,
        })
    }

    /// Pretty JSON. Object keys come out in sorted order, so equal inputs
    /// produce byte-identical documents.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are finite JSON")
    }
}
