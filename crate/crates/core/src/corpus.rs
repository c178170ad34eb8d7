//! Dataset manifest: ⟨App, Lib⟩ pairs, their vulnerability records and
//! exemplar tests.
//!
//! The manifest is a TOML file with one `[[pair]]` table per pair:
//!
//! ```toml
//! labels = "labels.toml"            # optional, ground-truth labels file
//!
//! [[pair]]
//! pair_id = "demo-a"
//! app_root = "apps/phonebook"       # relative to the manifest file
//! build_system = "maven"            # maven | gradle | plain
//! lib = "acme-xmlkit 1.0.0"
//! report_dirs = ["target/surefire-reports"]   # optional override
//!
//! [pair.vulnerability]
//! vuln_id = "ACME-2024-0001"
//! attack_category = "OTH"           # DoS | DT | RCE | OTH
//! vulnerable_api_list = ["ElementFactory.createElement(String)"]
//! affected_versions = "acme-xmlkit <= 1.0.0"
//!
//! [pair.exemplar]
//! test_function_name = "testIllegalElementName"
//! test_source = "..."               # or test_source_file = "path"
//! origin_note = "acme-xmlkit 1.0.1 test suite"
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signature::{validate_signature, MethodSignature};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path} is not valid: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("pair `{pair_id}`: invalid field `{field}`: {message}")]
    Schema {
        pair_id: String,
        field: &'static str,
        message: String,
    },
    #[error("duplicate pair_id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuildSystem {
    Maven,
    Gradle,
    Plain,
}

impl BuildSystem {
    pub fn as_str(self) -> &'static str {
        match self {
            BuildSystem::Maven => "maven",
            BuildSystem::Gradle => "gradle",
            BuildSystem::Plain => "plain",
        }
    }

    /// Root of the conventional test source tree, relative to the app root.
    pub fn test_tree(self) -> &'static str {
        match self {
            BuildSystem::Maven | BuildSystem::Gradle => "src/test",
            BuildSystem::Plain => "test",
        }
    }
}

impl fmt::Display for BuildSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackCategory {
    DoS,
    DT,
    RCE,
    OTH,
}

impl AttackCategory {
    pub const ALL: [AttackCategory; 4] = [
        AttackCategory::DoS,
        AttackCategory::DT,
        AttackCategory::RCE,
        AttackCategory::OTH,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackCategory::DoS => "DoS",
            AttackCategory::DT => "DT",
            AttackCategory::RCE => "RCE",
            AttackCategory::OTH => "OTH",
        }
    }
}

impl fmt::Display for AttackCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnerabilityRecord {
    pub vuln_id: String,
    pub attack_category: AttackCategory,
    pub vulnerable_api_list: Vec<MethodSignature>,
    pub affected_versions: String,
}

impl VulnerabilityRecord {
    pub fn lists_api(&self, sig: &MethodSignature) -> bool {
        self.vulnerable_api_list.iter().any(|s| s.same_as(sig))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarTest {
    pub test_function_name: String,
    pub test_source: String,
    #[serde(default)]
    pub origin_note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramPair {
    pub pair_id: String,
    pub app_root: PathBuf,
    pub build_system: BuildSystem,
    pub lib: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub report_dirs: Vec<String>,
    pub vulnerability: VulnerabilityRecord,
    pub exemplar: ExemplarTest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(rename = "pair", default)]
    pub pairs: Vec<ProgramPair>,
}

// Raw on-disk shapes; validated into the public types above.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    labels: Option<PathBuf>,
    #[serde(default)]
    pair: Vec<RawPair>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    pair_id: Option<String>,
    app_root: Option<PathBuf>,
    build_system: Option<String>,
    lib: Option<String>,
    #[serde(default)]
    report_dirs: Vec<String>,
    vulnerability: Option<RawVuln>,
    exemplar: Option<RawExemplar>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVuln {
    vuln_id: Option<String>,
    attack_category: Option<String>,
    #[serde(default)]
    vulnerable_api_list: Vec<String>,
    affected_versions: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExemplar {
    test_function_name: Option<String>,
    test_source: Option<String>,
    test_source_file: Option<PathBuf>,
    #[serde(default)]
    origin_note: String,
}

fn schema(pair_id: &str, field: &'static str, message: impl Into<String>) -> CorpusError {
    CorpusError::Schema {
        pair_id: pair_id.to_string(),
        field,
        message: message.into(),
    }
}

fn required<T>(pair_id: &str, field: &'static str, v: Option<T>) -> Result<T, CorpusError> {
    v.ok_or_else(|| schema(pair_id, field, "missing"))
}

/// Load and validate a manifest. Relative paths resolve against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base).map_err(|e| match e {
        CorpusError::Syntax { message, .. } => CorpusError::Syntax {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Parse manifest text; `base` anchors relative paths.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Manifest, CorpusError> {
    let raw: RawManifest = toml::from_str(text).map_err(|e| CorpusError::Syntax {
        path: PathBuf::new(),
        message: e.to_string(),
    })?;
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(raw.pair.len());
    for (idx, rp) in raw.pair.into_iter().enumerate() {
        let pair = validate_pair(rp, idx, base)?;
        if !seen.insert(pair.pair_id.clone()) {
            return Err(CorpusError::DuplicateId(pair.pair_id));
        }
        pairs.push(pair);
    }
    Ok(Manifest {
        labels: raw.labels.map(|p| base.join(p)),
        pairs,
    })
}

fn validate_pair(rp: RawPair, idx: usize, base: &Path) -> Result<ProgramPair, CorpusError> {
    let placeholder = format!("#{}", idx + 1);
    let pair_id = rp
        .pair_id
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| schema(&placeholder, "pair_id", "missing or empty"))?;
    if !pair_id
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
    {
        return Err(schema(&pair_id, "pair_id", "must be a slug of [A-Za-z0-9._-]"));
    }
    let id = pair_id.as_str();

    let build_system = match required(id, "build_system", rp.build_system)?.as_str() {
        "maven" => BuildSystem::Maven,
        "gradle" => BuildSystem::Gradle,
        "plain" => BuildSystem::Plain,
        other => return Err(schema(id, "build_system", format!("unknown build system `{other}`"))),
    };
    let app_root = base.join(required(id, "app_root", rp.app_root)?);
    if !app_root.is_dir() {
        return Err(schema(id, "app_root", format!("{} is not a directory", app_root.display())));
    }
    let detected = detect_descriptor(&app_root);
    if detected != build_system {
        return Err(schema(
            id,
            "build_system",
            format!(
                "declared {build_system} but {} looks like a {detected} project",
                app_root.display()
            ),
        ));
    }
    let lib = required(id, "lib", rp.lib)?;

    let rv = required(id, "vulnerability", rp.vulnerability)?;
    let vuln_id = required(id, "vuln_id", rv.vuln_id).and_then(|v| {
        if v.trim().is_empty() {
            Err(schema(id, "vuln_id", "empty"))
        } else {
            Ok(v)
        }
    })?;
    let attack_category = match required(id, "attack_category", rv.attack_category)?.as_str() {
        "DoS" => AttackCategory::DoS,
        "DT" => AttackCategory::DT,
        "RCE" => AttackCategory::RCE,
        "OTH" => AttackCategory::OTH,
        other => {
            return Err(schema(
                id,
                "attack_category",
                format!("`{other}` is not one of DoS, DT, RCE, OTH"),
            ))
        }
    };
    if rv.vulnerable_api_list.is_empty() {
        return Err(schema(id, "vulnerable_api_list", "must list at least one API"));
    }
    let vulnerable_api_list = rv
        .vulnerable_api_list
        .iter()
        .map(|s| validate_signature(s).map_err(|e| schema(id, "vulnerable_api_list", e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let affected_versions = required(id, "affected_versions", rv.affected_versions)?;

    let re = required(id, "exemplar", rp.exemplar)?;
    let test_function_name = required(id, "test_function_name", re.test_function_name)?;
    let test_source = match (re.test_source, re.test_source_file) {
        (Some(src), None) => src,
        (None, Some(file)) => {
            let file = base.join(file);
            fs::read_to_string(&file).map_err(|source| CorpusError::Io { path: file, source })?
        }
        (Some(_), Some(_)) => {
            return Err(schema(id, "test_source", "give either test_source or test_source_file, not both"))
        }
        (None, None) => return Err(schema(id, "test_source", "missing")),
    };
    if test_source.trim().is_empty() {
        return Err(schema(id, "test_source", "empty"));
    }
    if !contains_token(&test_source, &test_function_name) {
        return Err(schema(
            id,
            "test_function_name",
            format!("`{test_function_name}` does not appear in the exemplar source"),
        ));
    }

    Ok(ProgramPair {
        pair_id,
        app_root,
        build_system,
        lib,
        report_dirs: rp.report_dirs,
        vulnerability: VulnerabilityRecord {
            vuln_id,
            attack_category,
            vulnerable_api_list,
            affected_versions,
        },
        exemplar: ExemplarTest {
            test_function_name,
            test_source,
            origin_note: re.origin_note,
        },
    })
}

fn contains_token(text: &str, token: &str) -> bool {
    let is_ident = |c: char| c.is_alphanumeric() || c == '_' || c == '$';
    text.match_indices(token).any(|(pos, _)| {
        let before = text[..pos].chars().next_back();
        let after = text[pos + token.len()..].chars().next();
        !before.is_some_and(is_ident) && !after.is_some_and(is_ident)
    })
}

/// Build system implied by the descriptor files at `root`.
pub fn detect_descriptor(root: &Path) -> BuildSystem {
    if root.join("pom.xml").is_file() {
        BuildSystem::Maven
    } else if root.join("build.gradle").is_file() || root.join("build.gradle.kts").is_file() {
        BuildSystem::Gradle
    } else {
        BuildSystem::Plain
    }
}

/// Serialize a manifest back to TOML with every path absolute and every
/// exemplar inlined.
pub fn serialize_manifest(manifest: &Manifest) -> String {
    toml::to_string_pretty(manifest).expect("manifest types always serialize")
}
