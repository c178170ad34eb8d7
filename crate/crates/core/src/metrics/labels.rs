use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signature::{validate_signature, MethodSignature};

/// Which ground-truth condition a non-demonstrating test failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FailedCondition {
    C1,
    C2,
    C3,
    #[default]
    #[serde(rename = "none")]
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Label {
    /// `pair/task-N`.
    pub task: String,
    pub demonstrated: bool,
    /// Overrides the harness outcome when given.
    #[serde(default)]
    pub compiled: Option<bool>,
    #[serde(default)]
    pub failed_condition: FailedCondition,
    #[serde(default)]
    pub note: String,
}

/// A source method known to reach a sink, used for recall.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownEntryPoint {
    pub pair: String,
    pub method: MethodSignature,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Labels {
    pub by_task: BTreeMap<String, Label>,
    pub known_entry_points: Vec<KnownEntryPoint>,
}

#[derive(Debug, Error)]
pub enum LabelsError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("labels: {0}")]
    Syntax(String),
    #[error("label for `{task}`: {message}")]
    Invalid { task: String, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLabels {
    #[serde(default)]
    label: Vec<Label>,
    #[serde(default)]
    known_entry_point: Vec<RawKnown>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKnown {
    pair: String,
    method: String,
}

pub fn parse_labels(text: &str) -> Result<Labels, LabelsError> {
    let raw: RawLabels = toml::from_str(text).map_err(|e| LabelsError::Syntax(e.to_string()))?;
    let mut out = Labels::default();
    for l in raw.label {
        let bad = |message: &str| LabelsError::Invalid {
            task: l.task.clone(),
            message: message.to_string(),
        };
        if l.demonstrated && l.compiled == Some(false) {
            return Err(bad("a demonstrating test must compile"));
        }
        if l.demonstrated && l.failed_condition != FailedCondition::None {
            return Err(bad("a demonstrating test cannot fail a condition"));
        }
        if out.by_task.contains_key(&l.task) {
            return Err(bad("duplicate label"));
        }
        out.by_task.insert(l.task.clone(), l);
    }
    for k in raw.known_entry_point {
        let method = validate_signature(&k.method).map_err(|e| LabelsError::Invalid {
            task: k.method.clone(),
            message: e.to_string(),
        })?;
        out.known_entry_points.push(KnownEntryPoint { pair: k.pair, method });
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<Labels, LabelsError> {
    let text = fs::read_to_string(path).map_err(|source| LabelsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_labels(&text)
}
