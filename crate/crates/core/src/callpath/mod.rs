//! Source-to-sink call paths inside an application.
//!
//! An agent reports candidate paths in the block format emitted by
//! [`render_callpath_prompt`]; [`parse_agent_paths`] turns them into
//! [`CallPath`] values, [`verify_path`] screens each one against the
//! application source, and [`sample_tasks`] keeps one maximal path per
//! source method. [`enumerate_paths_oracle`] enumerates the expected
//! path set directly from source and is used to cross-check screening.

mod oracle;
mod parse;
mod prompt;
mod sample;
mod verify;

use std::fmt;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};

use crate::javasrc::{EnclosingKind, Visibility};
use crate::signature::{strip_ws, MethodSignature};

pub use oracle::{enumerate_paths_oracle, OracleError, ORACLE_MAX_LEN, ORACLE_METHOD_CAP};
pub use parse::{parse_agent_paths, ParseDiagnostic, ParsedPaths, BLOCK_BEGIN, BLOCK_END, NO_PATHS};
pub use prompt::{render_callpath_prompt, PromptError, CALLPATH_SECTIONS};
pub use sample::{sample_tasks, DEFAULT_SEED};
pub use verify::verify_path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallPathNode {
    pub method_signature: MethodSignature,
    pub visibility: Visibility,
    pub file_rel_path: String,
    pub line: usize,
    pub enclosing_kind: EnclosingKind,
}

impl CallPathNode {
    pub fn method_name(&self) -> &str {
        self.method_signature.method()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    EmptyPath,
    RepeatedNode,
    PathEscapesRoot,
    LocationMismatch,
    SourceNotPublic,
    SourceInAnonymousClass,
    PublicIntermediate,
    MissingCallEdge,
    MissingSinkCall,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::EmptyPath => "empty-path",
            RejectReason::RepeatedNode => "repeated-node",
            RejectReason::PathEscapesRoot => "path-escapes-root",
            RejectReason::LocationMismatch => "location-mismatch",
            RejectReason::SourceNotPublic => "source-not-public",
            RejectReason::SourceInAnonymousClass => "source-in-anonymous-class",
            RejectReason::PublicIntermediate => "public-intermediate",
            RejectReason::MissingCallEdge => "missing-call-edge",
            RejectReason::MissingSinkCall => "missing-sink-call",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verification {
    Unverified,
    Verified,
    Rejected { reason: RejectReason, detail: String },
}

impl Verification {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verification::Verified)
    }

    pub fn reject_reason(&self) -> Option<RejectReason> {
        match self {
            Verification::Rejected { reason, .. } => Some(*reason),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallPath {
    pub nodes: Vec<CallPathNode>,
    pub sink: MethodSignature,
    /// Number of app-side call edges, source through the sink call.
    pub length: usize,
    pub verification: Verification,
}

impl CallPath {
    pub fn new(nodes: Vec<CallPathNode>, sink: MethodSignature) -> Self {
        let length = nodes.len();
        Self {
            nodes,
            sink,
            length,
            verification: Verification::Unverified,
        }
    }

    pub fn source(&self) -> Option<&CallPathNode> {
        self.nodes.first()
    }

    /// Identity used to compare paths from different producers: the file
    /// and method name of every node plus the sink. Signatures and line
    /// numbers are excluded because agents format them inconsistently.
    pub fn identity(&self) -> PathIdentity {
        PathIdentity {
            nodes: self
                .nodes
                .iter()
                .map(|n| (n.file_rel_path.clone(), n.method_name().to_string()))
                .collect(),
            sink: strip_ws(&self.sink.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathIdentity {
    pub nodes: Vec<(String, String)>,
    pub sink: String,
}

/// Paths reported for one sink, as persisted under `prompts/`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathsFile {
    pub sink: MethodSignature,
    pub paths: Vec<CallPath>,
    #[serde(default)]
    pub diagnostics: Vec<ParseDiagnostic>,
}

/// True when `rel` stays inside its root: relative, no `..`.
pub(crate) fn is_contained(rel: &str) -> bool {
    let p = Path::new(rel);
    !rel.is_empty()
        && p.components()
            .all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment() {
        assert!(is_contained("src/main/java/A.java"));
        assert!(!is_contained("../A.java"));
        assert!(!is_contained("/etc/passwd"));
        assert!(!is_contained("src/../../A.java"));
        assert!(!is_contained(""));
    }

    #[test]
    fn verification_serializes_with_reason_code() {
        let v = Verification::Rejected {
            reason: RejectReason::SourceInAnonymousClass,
            detail: "x".into(),
        };
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(
            json,
            r#"{"status":"rejected","reason":"source-in-anonymous-class","detail":"x"}"#
        );
        assert_eq!(serde_json::from_str::<Verification>(&json).unwrap(), v);
    }
}
