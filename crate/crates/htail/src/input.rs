//! Loading of law, model and configuration files.
//!
//! Every file is a JSON object that may carry a top-level
//! `"schema_version"`; when present it must equal [`SCHEMA_VERSION`].
use std::path::{Path, PathBuf};

use htail_core::dist::FamilySpec;
use htail_core::risk::{Horizon, RiskModelSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}:{}: field `{field}`: {message}", line.map_or_else(|| "?".to_string(), |l| l.to_string()))]
    Field {
        path: PathBuf,
        /// Line of the offending key, when it can be located.
        line: Option<usize>,
        field: String,
        message: String,
    },
    #[error("{path}: unsupported schema_version {found} (this build reads {SCHEMA_VERSION})")]
    Version { path: PathBuf, found: String },
}

/// Reads `path` as a `T`, stripping and checking `schema_version`.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse(&text, path)
}

/// [`load`] on an in-memory document; `path` only labels diagnostics.
pub fn parse<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, InputError> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| InputError::Syntax {
        path: path.to_owned(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(v) = obj.remove("schema_version") {
            if v.as_u64() != Some(SCHEMA_VERSION as u64) {
                return Err(InputError::Version {
                    path: path.to_owned(),
                    found: v.to_string(),
                });
            }
        }
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        let message = e.into_inner().to_string();
        let key = quoted_name(&message).or_else(|| field.rsplit('.').next().filter(|k| !k.is_empty()).map(str::to_owned));
        InputError::Field {
            path: path.to_owned(),
            line: key.and_then(|k| key_line(text, &k)),
            field: if field == "." { "<root>".into() } else { field },
            message,
        }
    })
}

/// First backquoted name in a serde message, e.g. the unknown field.
fn quoted_name(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_owned())
}

/// 1-based line of the first `"key":` in `text`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let pat = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&pat)).map(|i| i + 1)
}

/// Monte Carlo settings carried by model files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Estimator {
    pub paths: u64,
    pub seed: u64,
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator { paths: 1_000_000, seed: 0 }
    }
}

/// Risk model file: the two laws, the horizon and estimator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub z_law: FamilySpec,
    pub y_law: FamilySpec,
    pub horizon: Horizon,
    #[serde(default)]
    pub estimator: Estimator,
}

impl ModelFile {
    pub fn spec(&self) -> RiskModelSpec {
        RiskModelSpec {
            z_law: self.z_law.clone(),
            y_law: self.y_law.clone(),
            horizon: self.horizon,
        }
    }
}
