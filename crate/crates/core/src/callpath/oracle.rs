use std::fs;
use std::path::Path;

use thiserror::Error;
use walkdir::WalkDir;

use super::{CallPath, CallPathNode, Verification};
use crate::javasrc::{self, EnclosingKind, MethodDecl, Visibility};
use crate::signature::MethodSignature;
use crate::workspace::rel_string;

/// Largest project (in method declarations) the oracle will enumerate.
pub const ORACLE_METHOD_CAP: usize = 50;
pub const ORACLE_MAX_LEN: usize = 6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("project has {found} methods, above the oracle cap of {cap}")]
    SizeCap { found: usize, cap: usize },
    #[error("max_len {0} exceeds the oracle limit of {ORACLE_MAX_LEN}")]
    MaxLen(usize),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

struct Method {
    rel: String,
    package: Option<String>,
    decl: MethodDecl,
}

fn skip_dir(rel: &str) -> bool {
    rel == "test"
        || rel.starts_with("test/")
        || rel.contains("src/test")
        || ["target", "build", "out", ".git", ".gradle"]
            .iter()
            .any(|d| rel == *d || rel.starts_with(&format!("{d}/")))
}

fn collect(app_root: &Path) -> Result<Vec<Method>, OracleError> {
    let mut methods = Vec::new();
    let walker = WalkDir::new(app_root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            let rel = rel_string(e.path().strip_prefix(app_root).unwrap_or(e.path()));
            e.depth() == 0 || !(e.file_type().is_dir() && skip_dir(&rel))
        });
    for entry in walker {
        let entry = entry.map_err(|e| OracleError::Io {
            path: app_root.display().to_string(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() || entry.path().extension().is_none_or(|x| x != "java") {
            continue;
        }
        let rel = rel_string(entry.path().strip_prefix(app_root).expect("under root"));
        let text = fs::read_to_string(entry.path()).map_err(|source| OracleError::Io {
            path: rel.clone(),
            source,
        })?;
        let file = javasrc::scan(&text);
        for decl in file.methods {
            methods.push(Method {
                rel: rel.clone(),
                package: file.package.clone(),
                decl,
            });
        }
    }
    Ok(methods)
}

fn is_source(m: &Method) -> bool {
    m.decl.visibility == Visibility::Public && m.decl.enclosing_kind == EnclosingKind::NamedType
}

/// Enumerate every qualifying source-to-sink path by exhaustive DFS over
/// a name-based call graph. Intended for fixture-scale projects.
pub fn enumerate_paths_oracle(
    app_root: &Path,
    sink: &MethodSignature,
    max_len: usize,
) -> Result<Vec<CallPath>, OracleError> {
    if max_len > ORACLE_MAX_LEN {
        return Err(OracleError::MaxLen(max_len));
    }
    let methods = collect(app_root)?;
    if methods.len() > ORACLE_METHOD_CAP {
        return Err(OracleError::SizeCap {
            found: methods.len(),
            cap: ORACLE_METHOD_CAP,
        });
    }

    // callers[j] = indices of methods whose body calls a method named like j.
    let callers: Vec<Vec<usize>> = methods
        .iter()
        .map(|callee| {
            (0..methods.len())
                .filter(|&i| methods[i].decl.calls_name(&callee.decl.name))
                .collect()
        })
        .collect();

    let mut found: Vec<Vec<usize>> = Vec::new();
    for (last, m) in methods.iter().enumerate() {
        if m.decl.calls_with_arity(sink.method(), sink.arity()) {
            // Chains are built backwards: chain[0] is the sink caller.
            extend(&methods, &callers, vec![last], max_len, &mut found);
        }
    }

    let mut paths: Vec<CallPath> = found
        .into_iter()
        .map(|chain| {
            let nodes = chain
                .iter()
                .rev()
                .map(|&i| {
                    let m = &methods[i];
                    CallPathNode {
                        method_signature: m.decl.signature(m.package.as_deref()),
                        visibility: m.decl.visibility,
                        file_rel_path: m.rel.clone(),
                        line: m.decl.name_line,
                        enclosing_kind: m.decl.enclosing_kind,
                    }
                })
                .collect();
            let mut p = CallPath::new(nodes, sink.clone());
            p.verification = Verification::Verified;
            p
        })
        .collect();
    paths.sort_by_key(|p| {
        p.nodes
            .iter()
            .map(|n| (n.method_signature.to_string(), n.file_rel_path.clone(), n.line))
            .collect::<Vec<_>>()
    });
    Ok(paths)
}

fn extend(methods: &[Method], callers: &[Vec<usize>], chain: Vec<usize>, max_len: usize, out: &mut Vec<Vec<usize>>) {
    let head = &methods[*chain.last().expect("non-empty")];
    if is_source(head) {
        out.push(chain);
        return;
    }
    if head.decl.visibility == Visibility::Public || chain.len() >= max_len {
        // Public but anonymous: neither a source nor a valid intermediate.
        return;
    }
    for &caller in &callers[*chain.last().unwrap()] {
        if chain.contains(&caller) {
            continue;
        }
        let mut next = chain.clone();
        next.push(caller);
        extend(methods, callers, next, max_len, out);
    }
}
