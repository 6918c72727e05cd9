//! Run reports.
//!
//! A report is one JSON document. Object keys are emitted in sorted order,
//! so two runs with the same inputs differ only in `wall_time_ms`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Simulable, decomposable, verified, or a plain successful run.
    Affirmative,
    /// The run completed and the answer is no.
    Negative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub verdict: Verdict,
    pub results: Value,
    pub wall_time_ms: f64,
}

impl Report {
    /// Rejects reports that carry non-finite numbers. JSON has no encoding
    /// for them (they would be written as `null`), so results must never
    /// contain `null` either.
    pub fn check_finite(&self) -> Result<()> {
        if let Some((name, _)) = self.tolerances.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("tolerance {name} is not finite")));
        }
        if !self.wall_time_ms.is_finite() {
            return Err(Error::NumericalFailure("wall time is not finite".into()));
        }
        match find_null(&self.results, "results") {
            Some(path) => Err(Error::NumericalFailure(format!("{path} is not a finite number"))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("report: {e}")))
    }

    /// One `path = value` line per leaf, in document order.
    pub fn to_text(&self) -> String {
        let value = serde_json::to_value(self).expect("reports serialize");
        let mut out = String::new();
        flatten_into(&value, "", &mut out);
        out
    }
}

fn find_null(v: &Value, path: &str) -> Option<String> {
    match v {
        Value::Null => Some(path.to_string()),
        Value::Array(items) => items.iter().enumerate().find_map(|(i, x)| find_null(x, &format!("{path}[{i}]"))),
        Value::Object(map) => map.iter().find_map(|(k, x)| find_null(x, &format!("{path}.{k}"))),
        _ => None,
    }
}

fn flatten_into(v: &Value, path: &str, out: &mut String) {
    match v {
        Value::Array(items) if !items.is_empty() && items.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, x) in items.iter().enumerate() {
                flatten_into(x, &format!("{path}[{i}]"), out);
            }
        }
        Value::Object(map) if !map.is_empty() => {
            for (k, x) in map {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                flatten_into(x, &p, out);
            }
        }
        leaf => {
            out.push_str(path);
            out.push_str(" = ");
            out.push_str(&leaf.to_string());
            out.push('\n');
        }
    }
}
