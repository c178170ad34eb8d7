use std::fmt::Write;

use super::{TaskError, TaskSpec};
use crate::backends::markers;
use crate::callpath::CallPath;

pub const RULE_LABELS: [&str; 11] = ["R1", "R2", "R3", "R4", "R5", "R6", "R7", "R8", "R9", "R10", "R11"];
pub const INDEPENDENCE_LABELS: [&str; 3] = ["I1", "I2", "I3"];
pub const PAYLOAD_LABELS: [&str; 3] = ["P1", "P2", "P3"];
pub const EXPECTATION_LABELS: [&str; 6] = ["E1", "E2", "E3", "E4", "E5", "E6"];
pub const STEP_LABELS: [&str; 4] = ["Step 0", "Step 1", "Step 2", "Step 3"];

const RULES: [&str; 11] = [
    "Do not mock any class or method mentioned in the call path.",
    "Mock a class or method that the call path does not mention only when the test cannot compile without it.",
    "Write the test with the test framework and runner the project is already configured to use.",
    "Skip comparing checksum/hash/signature values of artifacts; they only guard build reproducibility.",
    "Use the Arrange-Act-Assert pattern for the test body.",
    "Arrange the inputs first, then act by calling source_method, the entry point of the call path.",
    "Assert on the observed runtime behavior of that call, not on source code or log text.",
    "Apply only minor fixes to the project when they are needed to make the test compile and run.",
    "Add a comment describing the behavior the exemplar test observes.",
    "Add a comment describing the behavior expected from this test while the vulnerability is present.",
    "Add a comment naming the vulnerable library as well as version, taken from input (vii).",
];

const INDEPENDENCE: [&str; 3] = [
    "Create a new test file; write it without referring to, depending on, or modifying any existing test.",
    "Do not call helpers, fixtures, or base classes defined by existing tests.",
    "Leave every existing test file unchanged.",
];

const PAYLOAD: [&str; 3] = [
    "Build all payloads and inputs programmatically inside the test.",
    "When an input must be a file, create it at runtime in a temporary directory or in an in-memory buffer.",
    "Do not read payloads from resources, fixtures, or the network.",
];

const EXPECTATIONS: [&str; 6] = [
    "Use the same semantic payload content as the exemplar test.",
    "Adapt that payload only as far as needed to pass it to source_method.",
    "Make the runtime behavior of the test as close as possible to that of the exemplar test.",
    "If the exemplar test produces a chain of exceptions while the vulnerability is present, the new test must \
     produce a chain too, and the type of the first exception in the sequence must match.",
    "If the exemplar test produces no exception while the vulnerability is present, the new test must throw an \
     exception in that case and a different exception when the vulnerability is absent.",
    "The test outcome must come from actual program execution, not by mocked or speculated execution.",
];

const STEPS: [&str; 4] = [
    "Read the build files first; this step determines the correct build root and test runner for the runs below.",
    "Build and run the new test automatically, and observe the compilation and execution output.",
    "Critique the result: decide whether the test compiles and whether it triggers the vulnerability as expected; \
     if not, revise the test to fix it.",
    "Repeat Steps 1-2 for up to 5 times, until the test meets every expectation above or no attempts remain.",
];

fn render_path(path: &CallPath) -> String {
    let mut s = String::new();
    for (i, n) in path.nodes.iter().enumerate() {
        let _ = writeln!(
            s,
            "{}. {} | {} | {}:{}",
            i + 1,
            n.method_signature,
            n.visibility.as_str(),
            n.file_rel_path,
            n.line
        );
    }
    let _ = writeln!(s, "-> {}", path.sink);
    s
}

fn labeled(p: &mut String, labels: &[&str], texts: &[&str]) {
    for (label, text) in labels.iter().zip(texts) {
        let _ = writeln!(p, "[{label}] {text}");
    }
}

/// Render the Phase II prompt. Pure in `task`.
pub fn render_generation_prompt(task: &TaskSpec) -> Result<String, TaskError> {
    task.validate()?;
    let mut p = String::new();
    let apis: Vec<String> = task.vulnerable_api_list.iter().map(|s| s.to_string()).collect();

    let _ = writeln!(p, "You are working in a Java project checked out in the current directory. Write one JUnit");
    let _ = writeln!(p, "test that demonstrates the library vulnerability below through this project's own code.");
    let _ = writeln!(p);

    let _ = writeln!(p, "## P1: Task Specification");
    let _ = writeln!(p);
    let _ = writeln!(p, "(i) sink_method: {}", task.sink_method);
    let _ = writeln!(p, "(ii) source_method: {}", task.source_method);
    let _ = writeln!(p, "(iii) client_rel_path: {}", task.client_rel_path);
    let _ = writeln!(p, "(iv) CALL_PATH:");
    p.push_str(&render_path(&task.call_path));
    let _ = writeln!(p, "(v) vulnerable_id: {}", task.vuln_id);
    let _ = writeln!(p, "(vi) vulnerable_api_list: {}", apis.join("; "));
    let _ = writeln!(p, "(vii) VULNERABLE LIBRARY/VERSION: {}", task.affected_versions);
    let _ = writeln!(p, "(viii) test_function_name: {}", task.test_function_name);
    let _ = writeln!(p, "(ix) TEST FUNCTION:");
    let _ = writeln!(p, "```java");
    p.push_str(task.test_function_source.trim_end_matches('\n'));
    let _ = writeln!(p);
    let _ = writeln!(p, "```");
    let _ = writeln!(p);
    let _ = writeln!(p, "The exemplar test (viii, ix) comes from the library's own test suite and exploits the");
    let _ = writeln!(p, "vulnerability by calling the vulnerable API directly. Your test must reach the same API");
    let _ = writeln!(p, "through source_method instead.");
    let _ = writeln!(p);

    let _ = writeln!(p, "## P2: Quality Control");
    let _ = writeln!(p);
    let _ = writeln!(p, "### Rules for test generation");
    labeled(&mut p, &RULE_LABELS, &RULES);
    let _ = writeln!(p);
    let _ = writeln!(p, "### Test independence requirements");
    labeled(&mut p, &INDEPENDENCE_LABELS, &INDEPENDENCE);
    let _ = writeln!(p);
    let _ = writeln!(p, "### Test data and payload requirements");
    labeled(&mut p, &PAYLOAD_LABELS, &PAYLOAD);
    let _ = writeln!(p);
    let _ = writeln!(p, "### Test behavior expectations (reference-driven)");
    labeled(&mut p, &EXPECTATION_LABELS, &EXPECTATIONS);
    let _ = writeln!(p);

    let _ = writeln!(p, "## P3: Procedure Control");
    let _ = writeln!(p);
    let _ = writeln!(p, "After writing the first version of the test:");
    for (label, text) in STEP_LABELS.iter().zip(STEPS) {
        let _ = writeln!(p, "{label}: {text}");
    }
    let _ = writeln!(p);

    let _ = writeln!(p, "## Reporting");
    let _ = writeln!(p);
    let _ = writeln!(p, "Print each marker below on a line of its own when you enter that phase of a round:");
    let _ = writeln!(p, "{} before writing or revising the test,", markers::GENERATE);
    let _ = writeln!(p, "{} before building and running it,", markers::EXECUTE);
    let _ = writeln!(p, "{} before judging the result.", markers::CRITIQUE);
    let _ = writeln!(p, "End every critique with two lines, `compiles: yes|no` and `triggers: yes|no`.");
    Ok(p)
}

/// Result of scanning a rendered prompt for its required parts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptCheck {
    pub inputs: usize,
    pub rules: usize,
    pub independence: usize,
    pub payload: usize,
    pub expectations: usize,
    pub steps: usize,
    pub missing: Vec<String>,
}

impl PromptCheck {
    pub fn complete(&self) -> bool {
        self.missing.is_empty()
    }

    /// All labeled rule, requirement and expectation sentences.
    pub fn sentences(&self) -> usize {
        self.rules + self.independence + self.payload + self.expectations
    }
}

/// Scan `prompt` for the nine input values of `task`, every labeled
/// block and every procedure step.
pub fn check_generation_prompt(prompt: &str, task: &TaskSpec) -> PromptCheck {
    let mut check = PromptCheck::default();
    let inputs = [
        ("(i)", task.sink_method.to_string()),
        ("(ii)", task.source_method.to_string()),
        ("(iii)", task.client_rel_path.clone()),
        ("(iv)", render_path(&task.call_path)),
        ("(v)", task.vuln_id.clone()),
        (
            "(vi)",
            task.vulnerable_api_list.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("; "),
        ),
        ("(vii)", task.affected_versions.clone()),
        ("(viii)", task.test_function_name.clone()),
        ("(ix)", task.test_function_source.trim_end_matches('\n').to_string()),
    ];
    for (label, value) in inputs {
        let present = prompt.lines().any(|l| l.starts_with(&format!("{label} "))) && prompt.contains(&value);
        if present {
            check.inputs += 1;
        } else {
            check.missing.push(format!("input {label}"));
        }
    }
    let mut scan = |labels: &[&str], count: &mut usize| {
        for label in labels {
            let tag = format!("[{label}] ");
            if prompt.lines().any(|l| l.starts_with(&tag) && l.len() > tag.len()) {
                *count += 1;
            } else {
                check.missing.push(label.to_string());
            }
        }
    };
    let (mut r, mut i, mut pl, mut e) = (0, 0, 0, 0);
    scan(&RULE_LABELS, &mut r);
    scan(&INDEPENDENCE_LABELS, &mut i);
    scan(&PAYLOAD_LABELS, &mut pl);
    scan(&EXPECTATION_LABELS, &mut e);
    (check.rules, check.independence, check.payload, check.expectations) = (r, i, pl, e);
    for step in STEP_LABELS {
        if prompt.lines().any(|l| l.starts_with(&format!("{step}: "))) {
            check.steps += 1;
        } else {
            check.missing.push(step.to_string());
        }
    }
    check
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callpath::{CallPathNode, Verification};
    use crate::javasrc::{EnclosingKind, Visibility};
    use crate::signature::validate_signature;

    pub(crate) fn task() -> TaskSpec {
        let node = |sig: &str, vis, line| CallPathNode {
            method_signature: validate_signature(sig).unwrap(),
            visibility: vis,
            file_rel_path: "src/main/java/com/example/Exporter.java".into(),
            line,
            enclosing_kind: EnclosingKind::NamedType,
        };
        let mut path = CallPath::new(
            vec![
                node("com.example.Exporter.export(String)", Visibility::Public, 10),
                node("com.example.Exporter.build(String)", Visibility::Private, 20),
            ],
            validate_signature("ElementFactory.createElement(String)").unwrap(),
        );
        path.verification = Verification::Verified;
        TaskSpec {
            pair_id: "demo-a".into(),
            task_id: "task-1".into(),
            sink_method: path.sink.clone(),
            source_method: path.nodes[0].method_signature.clone(),
            client_rel_path: path.nodes[0].file_rel_path.clone(),
            call_path: path,
            vuln_id: "ACME-2024-0001".into(),
            vulnerable_api_list: vec![validate_signature("ElementFactory.createElement(String)").unwrap()],
            affected_versions: "acme-xmlkit <= 1.0.0".into(),
            test_function_name: "rejectsIllegalName".into(),
            test_function_source: "@Test\nvoid rejectsIllegalName() {}\n".into(),
        }
    }

    #[test]
    fn complete_prompt() {
        let t = task();
        let p = render_generation_prompt(&t).unwrap();
        let c = check_generation_prompt(&p, &t);
        assert!(c.complete(), "{:?}", c.missing);
        assert_eq!((c.inputs, c.sentences(), c.steps), (9, 23, 4));
        assert!(p.contains("for up to 5 times"));
    }

    #[test]
    fn check_notices_missing_parts() {
        let t = task();
        let p = render_generation_prompt(&t).unwrap().replace("[E4]", "[E?]").replace("(v) vulnerable_id", "(v) id");
        let c = check_generation_prompt(&p.replace("ACME-2024-0001", "X"), &t);
        assert_eq!(c.missing, vec!["input (v)".to_string(), "E4".to_string()]);
    }

    #[test]
    fn vuln_id_only_difference() {
        let a = task();
        let mut b = task();
        b.vuln_id = "OTHER-7".into();
        let pa = render_generation_prompt(&a).unwrap();
        let pb = render_generation_prompt(&b).unwrap();
        assert_ne!(pa, pb);
        assert_eq!(pa.replace("ACME-2024-0001", "@"), pb.replace("OTHER-7", "@"));
    }

    #[test]
    fn invariants_enforced() {
        let mut t = task();
        t.call_path.verification = Verification::Unverified;
        assert_eq!(render_generation_prompt(&t), Err(TaskError::Unverified));
        let mut t = task();
        t.source_method = validate_signature("com.example.Exporter.other()").unwrap();
        assert_eq!(render_generation_prompt(&t), Err(TaskError::SourceMismatch));
        let mut t = task();
        t.vulnerable_api_list.clear();
        assert!(matches!(render_generation_prompt(&t), Err(TaskError::UnknownSink(_))));
    }
}
