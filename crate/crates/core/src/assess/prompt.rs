use std::fmt::Write;
use std::fs;
use std::io;

use crate::corpus::{BuildSystem, ProgramPair};
use crate::harness::ExecutionRecord;
use crate::testgen::TestFile;
use crate::workspace::PairWorkspace;

pub const DEFAULT_LOG_BUDGET: usize = 64 * 1024;

pub const ASSESS_SECTIONS: [&str; 4] = [
    "## 1. Test Configuration",
    "## 2. Task Specification",
    "## 3. Output Formatting",
    "## 4. Test and Execution Data",
];

pub const TRUNCATION_MARKER: &str = "[log truncated:";

/// Everything the judge prompt is made of.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssessmentInput {
    pub project: String,
    pub build_system: BuildSystem,
    pub vuln_id: String,
    pub test_class: String,
    pub test_method: String,
    pub test_rel_path: String,
    pub test_source: String,
    pub raw_log: String,
    pub summary_jsonl: String,
}

/// Read the test source and both logs of one executed task.
pub fn load_assessment_input(
    pair: &ProgramPair,
    pws: &PairWorkspace,
    worktree: &std::path::Path,
    test: &TestFile,
    record: &ExecutionRecord,
) -> io::Result<AssessmentInput> {
    let read = |p: std::path::PathBuf| fs::read(p).map(|b| String::from_utf8_lossy(&b).into_owned());
    Ok(AssessmentInput {
        project: pair.pair_id.clone(),
        build_system: pair.build_system,
        vuln_id: pair.vulnerability.vuln_id.clone(),
        test_class: test.qualified_class(),
        test_method: test.method_name.clone(),
        test_rel_path: test.rel_path.clone(),
        test_source: read(worktree.join(&test.rel_path))?,
        raw_log: read(pws.root.join(&record.raw_log_path))?,
        summary_jsonl: read(pws.root.join(&record.summary_path))?,
    })
}

/// Keep the last `budget` bytes of `log`, cut at a line start when one
/// is close by.
fn tail(log: &str, budget: usize) -> (usize, &str) {
    if log.len() <= budget {
        return (0, log);
    }
    let mut start = log.len() - budget;
    while !log.is_char_boundary(start) {
        start += 1;
    }
    if let Some(nl) = log[start..].find('\n').filter(|&i| i < 512) {
        start += nl + 1;
    }
    (start, &log[start..])
}

fn fenced(p: &mut String, lang: &str, body: &str) {
    let _ = writeln!(p, "```{lang}");
    p.push_str(body);
    if !body.is_empty() && !body.ends_with('\n') {
        p.push('\n');
    }
    let _ = writeln!(p, "```");
}

/// Render the judge prompt. Pure in its inputs.
pub fn render_assessment_prompt(input: &AssessmentInput, log_budget: usize) -> String {
    let mut p = String::new();
    let _ = writeln!(p, "You are reviewing an automatically generated proof-of-vulnerability (PoV) test.");
    let _ = writeln!(p);

    let _ = writeln!(p, "{}", ASSESS_SECTIONS[0]);
    let _ = writeln!(p);
    let _ = writeln!(p, "- Project: {}", input.project);
    let _ = writeln!(p, "- Build system: {}", input.build_system);
    let _ = writeln!(p, "- Test class: {}", input.test_class);
    let _ = writeln!(p, "- Test method: {}", input.test_method);
    let _ = writeln!(p);

    let _ = writeln!(p, "{}", ASSESS_SECTIONS[1]);
    let _ = writeln!(p);
    let _ = writeln!(p, "The test T below was written to show that the project is exposed to vulnerability {}", input.vuln_id);
    let _ = writeln!(p, "of one of its libraries. Examine both T and the execution log L, and decide whether T");
    let _ = writeln!(p, "triggers the vulnerability as expected when it runs. A test that does not compile, does");
    let _ = writeln!(p, "not run, or fails for reasons unrelated to the vulnerability does not trigger it. Answer");
    let _ = writeln!(p, "unknown when the data is insufficient to decide.");
    let _ = writeln!(p);

    let _ = writeln!(p, "{}", ASSESS_SECTIONS[2]);
    let _ = writeln!(p);
    let _ = writeln!(p, "Reply with exactly these three fields, each starting on its own line:");
    let _ = writeln!(p);
    let _ = writeln!(p, "judgment: triggered | not_triggered | unknown");
    let _ = writeln!(p, "confidence: high | medium | low");
    let _ = writeln!(p, "explanation: <your reasoning, which may span several lines>");
    let _ = writeln!(p);

    let _ = writeln!(p, "{}", ASSESS_SECTIONS[3]);
    let _ = writeln!(p);
    let _ = writeln!(p, "### Test file ({})", input.test_rel_path);
    fenced(&mut p, "java", &input.test_source);
    let _ = writeln!(p);
    let _ = writeln!(p, "### Execution log (.txt)");
    let (cut, shown) = tail(&input.raw_log, log_budget);
    if cut > 0 {
        let _ = writeln!(p, "{TRUNCATION_MARKER} first {cut} bytes omitted]");
    }
    fenced(&mut p, "text", shown);
    let _ = writeln!(p);
    let _ = writeln!(p, "### Execution summary (.jsonl)");
    fenced(&mut p, "json", &input.summary_jsonl);
    p
}
