mod common;

use povgen_core::harness::{exit_code_summary, outcome_of, parse_jsonl, summarize_reports, to_jsonl, Status, TestOutcome};

const SAMPLES: [(&str, &str, &str, TestOutcome); 5] = [
    ("pass", "com.example.catalog.CatalogExporterPovTest", "exportAcceptsIllegalElementName", TestOutcome::Passed),
    ("failure", "com.example.catalog.CatalogExporterPovTest", "exportAcceptsIllegalElementName", TestOutcome::Failed),
    ("error", "com.example.config.ConfigServicePovTest", "nestedDocumentExhaustsStack", TestOutcome::Errored),
    ("skipped", "com.example.calc.CalculatorPovTest", "computeReachesRuntime", TestOutcome::Skipped),
    ("malformed", "com.example.catalog.CatalogExporterPovTest", "exportAcceptsIllegalElementName", TestOutcome::Errored),
];

#[test]
fn report_samples_match_goldens() {
    for (name, class, method, outcome) in SAMPLES {
        let dir = common::testdata().join("reports").join(name);
        let entries = summarize_reports(&dir, class, Some(method));
        assert_eq!(entries.len(), 1, "{name}: {entries:?}");
        assert_eq!(outcome_of(&entries), outcome, "{name}");
        let jsonl = to_jsonl(&entries);
        assert_eq!(parse_jsonl(&jsonl).unwrap(), entries);
        common::assert_golden(&format!("summary/{name}.jsonl"), &jsonl);
    }
}

#[test]
fn class_filter_accepts_simple_names() {
    let dir = common::testdata().join("reports/failure");
    assert_eq!(summarize_reports(&dir, "CatalogExporterPovTest", None).len(), 2);
    assert!(summarize_reports(&dir, "OtherTest", None).is_empty());
}

#[test]
fn exit_code_fallback() {
    let ok = exit_code_summary(0, "p.T", "m");
    assert_eq!(ok.status, Status::Pass);
    assert_eq!(ok.first_failure_line, None);
    for code in [1, 2, 127, -1] {
        let bad = exit_code_summary(code, "p.T", "m");
        assert_eq!(bad.status, Status::CommandFailure);
        assert!(bad.first_failure_line.unwrap().contains(&code.to_string()));
    }
    common::assert_golden(
        "summary/exit-codes.jsonl",
        &to_jsonl(&[exit_code_summary(0, "p.T", "m"), exit_code_summary(1, "p.T", "m")]),
    );
}
