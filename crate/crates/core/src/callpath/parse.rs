use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{is_contained, CallPath, CallPathNode};
use crate::corpus::ProgramPair;
use crate::javasrc::{EnclosingKind, Visibility};
use crate::signature::validate_signature;

pub const BLOCK_BEGIN: &str = "BEGIN CALL PATH";
pub const BLOCK_END: &str = "END CALL PATH";
pub const NO_PATHS: &str = "NO CALL PATHS";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    /// 1-based line of the offending block's first line.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedPaths {
    pub paths: Vec<CallPath>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

fn node_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^\s*(\d+)[.)]\s+(.+?)\s*\|\s*([A-Za-z-]+)\s*\|\s*(.+?):(\d+)\s*(?:\|\s*(named|anonymous)\s*)?$",
        )
        .expect("static regex")
    })
}

fn strip_markup(line: &str) -> &str {
    line.trim().trim_matches('`').trim_matches('*').trim()
}

/// Extract every call-path block from agent output. Malformed blocks
/// become diagnostics; parsing never fails.
pub fn parse_agent_paths(agent_output: &str, pair: &ProgramPair) -> ParsedPaths {
    let mut out = ParsedPaths::default();
    let mut block: Option<(usize, Vec<(usize, &str)>)> = None;

    for (idx, raw) in agent_output.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_markup(raw);
        if line == BLOCK_BEGIN {
            if let Some((start, _)) = block.take() {
                out.diagnostics.push(ParseDiagnostic {
                    line: start,
                    message: format!("block not closed before the next {BLOCK_BEGIN}"),
                });
            }
            block = Some((lineno, Vec::new()));
        } else if line == BLOCK_END {
            match block.take() {
                Some((start, lines)) => match parse_block(&lines, pair) {
                    Ok(path) => out.paths.push(path),
                    Err(message) => out.diagnostics.push(ParseDiagnostic { line: start, message }),
                },
                None => out.diagnostics.push(ParseDiagnostic {
                    line: lineno,
                    message: format!("{BLOCK_END} without a matching {BLOCK_BEGIN}"),
                }),
            }
        } else if let Some((_, lines)) = block.as_mut() {
            if !line.is_empty() {
                lines.push((lineno, raw));
            }
        }
    }
    if let Some((start, _)) = block {
        out.diagnostics.push(ParseDiagnostic {
            line: start,
            message: "block not closed before end of output".into(),
        });
    }
    out
}

fn parse_block(lines: &[(usize, &str)], pair: &ProgramPair) -> Result<CallPath, String> {
    let mut sink = None;
    let mut nodes = Vec::new();
    for &(lineno, raw) in lines {
        let line = strip_markup(raw);
        if let Some(rest) = line.strip_prefix("sink:") {
            let sig = validate_signature(rest).map_err(|e| format!("line {lineno}: {e}"))?;
            if !pair.vulnerability.lists_api(&sig) {
                return Err(format!("line {lineno}: sink `{sig}` is not a listed vulnerable API"));
            }
            sink = Some(sig);
            continue;
        }
        let caps = node_re()
            .captures(line)
            .ok_or_else(|| format!("line {lineno}: unrecognized node line `{line}`"))?;
        let ordinal: usize = caps[1].parse().map_err(|_| format!("line {lineno}: bad ordinal"))?;
        if ordinal != nodes.len() + 1 {
            return Err(format!("line {lineno}: expected node {}, found {ordinal}", nodes.len() + 1));
        }
        let method_signature = validate_signature(caps[2].trim_matches('`')).map_err(|e| format!("line {lineno}: {e}"))?;
        let visibility = Visibility::parse(&caps[3])
            .ok_or_else(|| format!("line {lineno}: unknown visibility `{}`", &caps[3]))?;
        let file_rel_path = caps[4].trim().trim_matches('`').replace('\\', "/");
        if !is_contained(&file_rel_path) {
            return Err(format!("line {lineno}: file `{file_rel_path}` is outside the project root"));
        }
        let line_no: usize = caps[5].parse().map_err(|_| format!("line {lineno}: bad line number"))?;
        if line_no == 0 {
            return Err(format!("line {lineno}: line numbers are 1-based"));
        }
        let enclosing_kind = match caps.get(6).map(|m| m.as_str()) {
            Some("anonymous") => EnclosingKind::AnonymousType,
            _ => EnclosingKind::NamedType,
        };
        nodes.push(CallPathNode {
            method_signature,
            visibility,
            file_rel_path,
            line: line_no,
            enclosing_kind,
        });
    }
    let sink = sink.ok_or("block has no `sink:` line")?;
    if nodes.is_empty() {
        return Err("block lists no nodes".into());
    }
    Ok(CallPath::new(nodes, sink))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callpath::Verification;
    use crate::corpus::{AttackCategory, BuildSystem, ExemplarTest, VulnerabilityRecord};
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn pair() -> ProgramPair {
        ProgramPair {
            pair_id: "demo-a".into(),
            app_root: PathBuf::from("/app"),
            build_system: BuildSystem::Maven,
            lib: "acme-xmlkit 1.0.0".into(),
            report_dirs: vec![],
            vulnerability: VulnerabilityRecord {
                vuln_id: "ACME-1".into(),
                attack_category: AttackCategory::OTH,
                vulnerable_api_list: vec![validate_signature("ElementFactory.createElement(String)").unwrap()],
                affected_versions: "<= 1.0.0".into(),
            },
            exemplar: ExemplarTest {
                test_function_name: "t".into(),
                test_source: "void t() {}".into(),
                origin_note: String::new(),
            },
        }
    }

    const GOOD: &str = "BEGIN CALL PATH
sink: ElementFactory.createElement(String)
1. com.example.PhoneBook.writeXml(String) | public | src/main/java/com/example/PhoneBook.java:12
END CALL PATH
";

    #[test]
    fn single_block() {
        let parsed = parse_agent_paths(GOOD, &pair());
        assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
        assert_eq!(parsed.paths.len(), 1);
        let path = &parsed.paths[0];
        assert_eq!(path.length, 1);
        assert_eq!(path.verification, Verification::Unverified);
        assert_eq!(path.nodes[0].line, 12);
        assert_eq!(path.nodes[0].visibility, Visibility::Public);
        assert_eq!(path.nodes[0].file_rel_path, "src/main/java/com/example/PhoneBook.java");
    }

    #[test]
    fn good_and_malformed_blocks() {
        let text = format!(
            "Here is what I found:\n```\n{GOOD}```\n\nBEGIN CALL PATH\nsink: ElementFactory.createElement(String)\n1. writeXml | public | A.java:3\nEND CALL PATH\n"
        );
        let parsed = parse_agent_paths(&text, &pair());
        assert_eq!(parsed.paths.len(), 1);
        assert_eq!(parsed.diagnostics.len(), 1);
        assert_eq!(parsed.diagnostics[0].line, 9);
    }

    #[test]
    fn multi_node_block_and_anonymous_flag() {
        let text = "BEGIN CALL PATH
sink: ElementFactory.createElement(String)
1. a.B.c(String) | public | src/B.java:3
2) a.B.d(String) | private | src/B.java:9 | anonymous
END CALL PATH";
        let parsed = parse_agent_paths(text, &pair());
        assert_eq!(parsed.paths[0].length, 2);
        assert_eq!(parsed.paths[0].nodes[1].enclosing_kind, EnclosingKind::AnonymousType);
    }

    #[test]
    fn rejects_unlisted_sink_escape_and_order() {
        let cases = [
            GOOD.replace("ElementFactory.createElement(String)", "JSON.parse(String)"),
            GOOD.replace("src/main", "../src/main"),
            GOOD.replace("1. com", "2. com"),
            GOOD.replace(":12", ":0"),
            GOOD.replace("| public |", "| friendly |"),
            GOOD.replace("END CALL PATH\n", ""),
            GOOD.replace("sink: ElementFactory.createElement(String)\n", ""),
        ];
        for case in cases {
            let parsed = parse_agent_paths(&case, &pair());
            assert!(parsed.paths.is_empty(), "{case}");
            assert_eq!(parsed.diagnostics.len(), 1, "{case}");
        }
    }

    #[test]
    fn stray_end_is_diagnosed() {
        let parsed = parse_agent_paths("END CALL PATH\n", &pair());
        assert_eq!(parsed.diagnostics.len(), 1);
    }

    #[test]
    fn no_paths_marker() {
        let parsed = parse_agent_paths(NO_PATHS, &pair());
        assert_eq!(parsed, ParsedPaths::default());
    }

    proptest! {
        #[test]
        fn total_over_random_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let text = String::from_utf8_lossy(&bytes);
            let parsed = parse_agent_paths(&text, &pair());
            prop_assert!(parsed.paths.is_empty());
        }

        #[test]
        fn total_over_block_shaped_noise(body in "(sink: |1\\. |[a-zA-Z.(|):0-9 ]{0,40}\n){0,6}") {
            let text = format!("{BLOCK_BEGIN}\n{body}{BLOCK_END}\n");
            let parsed = parse_agent_paths(&text, &pair());
            prop_assert_eq!(parsed.paths.len() + parsed.diagnostics.len(), 1);
        }
    }
}
