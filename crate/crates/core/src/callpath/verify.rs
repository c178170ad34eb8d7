use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;

use super::{is_contained, CallPath, RejectReason, Verification};
use crate::javasrc::{self, EnclosingKind, JavaFile, MethodDecl, Visibility};

/// Allowed distance between a reported line and the declaration.
const LINE_TOLERANCE: usize = 2;

fn reject(path: &CallPath, reason: RejectReason, detail: String) -> CallPath {
    CallPath {
        verification: Verification::Rejected { reason, detail },
        ..path.clone()
    }
}

fn load<'a>(cache: &'a mut HashMap<String, Option<JavaFile>>, root: &Path, rel: &str) -> io::Result<Option<&'a JavaFile>> {
    if !cache.contains_key(rel) {
        let full = root.join(rel);
        let parsed = if full.is_file() {
            Some(javasrc::scan(&fs::read_to_string(&full)?))
        } else {
            None
        };
        cache.insert(rel.to_string(), parsed);
    }
    Ok(cache[rel].as_ref())
}

fn near(decl: &MethodDecl, line: usize) -> bool {
    line + LINE_TOLERANCE >= decl.decl_line && line <= decl.name_line + LINE_TOLERANCE
}

/// Screen one reported path against the application source.
///
/// Checks run in order and the first failure is reported:
/// node locations, source visibility and enclosing type, non-public
/// intermediates, call edges between consecutive nodes, and the final
/// sink call. A verified path has its node lines, visibilities and
/// enclosing kinds normalized to what the source declares.
pub fn verify_path(path: &CallPath, app_root: &Path) -> io::Result<CallPath> {
    if path.nodes.is_empty() {
        return Ok(reject(path, RejectReason::EmptyPath, "path has no nodes".into()));
    }
    let mut seen = HashSet::new();
    for n in &path.nodes {
        if !seen.insert((n.file_rel_path.as_str(), n.method_name())) {
            return Ok(reject(
                path,
                RejectReason::RepeatedNode,
                format!("{} appears more than once", n.method_signature),
            ));
        }
    }

    let mut cache = HashMap::new();
    let mut decls: Vec<MethodDecl> = Vec::with_capacity(path.nodes.len());
    for (k, node) in path.nodes.iter().enumerate() {
        if !is_contained(&node.file_rel_path) {
            return Ok(reject(
                path,
                RejectReason::PathEscapesRoot,
                format!("node {}: `{}` is outside the app root", k + 1, node.file_rel_path),
            ));
        }
        let Some(file) = load(&mut cache, app_root, &node.file_rel_path)? else {
            return Ok(reject(
                path,
                RejectReason::LocationMismatch,
                format!("node {}: file `{}` does not exist", k + 1, node.file_rel_path),
            ));
        };
        let found = file
            .methods_named(node.method_name())
            .filter(|d| near(d, node.line))
            .min_by_key(|d| d.name_line.abs_diff(node.line));
        match found {
            Some(d) => decls.push(d.clone()),
            None => {
                return Ok(reject(
                    path,
                    RejectReason::LocationMismatch,
                    format!(
                        "node {}: no declaration of `{}` near {}:{}",
                        k + 1,
                        node.method_name(),
                        node.file_rel_path,
                        node.line
                    ),
                ))
            }
        }
    }

    let source = &decls[0];
    if source.visibility != Visibility::Public {
        return Ok(reject(
            path,
            RejectReason::SourceNotPublic,
            format!("source `{}` is {}", source.name, source.visibility.as_str()),
        ));
    }
    if source.enclosing_kind == EnclosingKind::AnonymousType {
        return Ok(reject(
            path,
            RejectReason::SourceInAnonymousClass,
            format!("source `{}` is declared in anonymous type {}", source.name, source.enclosing_type),
        ));
    }
    for (k, d) in decls.iter().enumerate().skip(1) {
        if d.visibility == Visibility::Public {
            return Ok(reject(
                path,
                RejectReason::PublicIntermediate,
                format!("node {} `{}` is public", k + 1, d.name),
            ));
        }
    }
    for (k, pair) in decls.windows(2).enumerate() {
        if !pair[0].calls_name(&pair[1].name) {
            return Ok(reject(
                path,
                RejectReason::MissingCallEdge,
                format!("node {} `{}` never calls `{}`", k + 1, pair[0].name, pair[1].name),
            ));
        }
    }
    let last = decls.last().expect("non-empty");
    if !last.calls_with_arity(path.sink.method(), path.sink.arity()) {
        return Ok(reject(
            path,
            RejectReason::MissingSinkCall,
            format!("`{}` never calls sink `{}`", last.name, path.sink),
        ));
    }

    let mut verified = path.clone();
    for (node, decl) in verified.nodes.iter_mut().zip(&decls) {
        node.line = decl.name_line;
        node.visibility = decl.visibility;
        node.enclosing_kind = decl.enclosing_kind;
    }
    verified.length = verified.nodes.len();
    verified.verification = Verification::Verified;
    Ok(verified)
}
