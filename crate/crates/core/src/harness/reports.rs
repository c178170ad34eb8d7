use std::fs;
use std::path::Path;

use roxmltree::{Document, Node};

use super::{Status, SummaryEntry};

fn class_matches(classname: &str, wanted: &str) -> bool {
    classname == wanted
        || classname.ends_with(&format!(".{wanted}"))
        || wanted.ends_with(&format!(".{classname}"))
}

fn method_matches(name: &str, wanted: &str) -> bool {
    name == wanted || name.strip_prefix(wanted).is_some_and(|rest| rest.starts_with('(') || rest.starts_with('['))
}

fn first_line(text: &str) -> Option<String> {
    text.lines().map(str::trim).find(|l| !l.is_empty()).map(str::to_string)
}

/// `pkg.SomeException` from `pkg.SomeException: message`.
fn exception_from_line(line: &str) -> Option<String> {
    let head = line.split(':').next()?.trim();
    let ok = !head.is_empty()
        && !head.contains(char::is_whitespace)
        && head.chars().all(|c| c.is_alphanumeric() || c == '.' || c == '$' || c == '_');
    ok.then(|| head.to_string())
}

fn entry_for(case: Node<'_, '_>) -> SummaryEntry {
    let outcome = case
        .children()
        .filter(Node::is_element)
        .find(|c| matches!(c.tag_name().name(), "failure" | "error" | "skipped"));
    let (status, first_failure_line, exception_type) = match outcome {
        None => (Status::Pass, None, None),
        Some(o) if o.tag_name().name() == "skipped" => (Status::Skipped, None, None),
        Some(o) => {
            let status = if o.tag_name().name() == "failure" { Status::Fail } else { Status::Error };
            let text: String = o.descendants().filter(Node::is_text).filter_map(|t| t.text()).collect();
            let ty = o.attribute("type").map(str::to_string);
            let line = first_line(&text).or_else(|| match (ty.as_deref(), o.attribute("message")) {
                (Some(t), Some(m)) => Some(format!("{t}: {m}")),
                (Some(t), None) => Some(t.to_string()),
                (None, Some(m)) => Some(m.to_string()),
                (None, None) => Some(format!("{} without details", o.tag_name().name())),
            });
            let ty = ty.or_else(|| line.as_deref().and_then(exception_from_line));
            (status, line, ty)
        }
    };
    SummaryEntry {
        test_class: case.attribute("classname").unwrap_or_default().to_string(),
        test_method: case.attribute("name").unwrap_or_default().to_string(),
        status,
        first_failure_line,
        exception_type,
        duration_s: case.attribute("time").and_then(|t| t.trim().parse::<f64>().ok()),
    }
}

/// Entries for every `testcase` of `test_class` (and `test_method`, when
/// given) in the XML files directly under `report_dir`, in file-name
/// then document order. Unreadable or ill-formed files yield one
/// `error` entry each.
pub fn summarize_reports(report_dir: &Path, test_class: &str, test_method: Option<&str>) -> Vec<SummaryEntry> {
    let mut files: Vec<_> = match fs::read_dir(report_dir) {
        Ok(rd) => rd
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "xml"))
            .collect(),
        Err(_) => return Vec::new(),
    };
    files.sort();

    let mut out = Vec::new();
    for file in files {
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let broken = |why: String| SummaryEntry {
            test_class: test_class.to_string(),
            test_method: test_method.unwrap_or_default().to_string(),
            status: Status::Error,
            first_failure_line: Some(format!("unreadable test report {name}: {why}")),
            exception_type: None,
            duration_s: None,
        };
        let text = match fs::read(&file) {
            Ok(b) => String::from_utf8_lossy(&b).into_owned(),
            Err(e) => {
                out.push(broken(e.to_string()));
                continue;
            }
        };
        let doc = match Document::parse(&text) {
            Ok(d) => d,
            Err(e) => {
                out.push(broken(e.to_string()));
                continue;
            }
        };
        for case in doc.descendants().filter(|n| n.has_tag_name("testcase")) {
            let cls = case.attribute("classname").unwrap_or_default();
            let name = case.attribute("name").unwrap_or_default();
            if class_matches(cls, test_class) && test_method.is_none_or(|m| method_matches(name, m)) {
                out.push(entry_for(case));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    const REPORT: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<testsuite name="com.example.PovTest" tests="3" failures="1" errors="0" skipped="1">
  <testcase name="pov" classname="com.example.PovTest" time="0.042">
    <failure message="boom" type="java.lang.AssertionError">java.lang.AssertionError: boom
	at com.example.PovTest.pov(PovTest.java:12)
</failure>
  </testcase>
  <testcase name="other" classname="com.example.PovTest" time="0.001"><skipped/></testcase>
  <testcase name="ok()" classname="com.example.PovTest" time="0.003"/>
</testsuite>
"#;

    fn dir_with(files: &[(&str, &str)]) -> TempDir {
        let d = TempDir::new().unwrap();
        for (n, t) in files {
            fs::write(d.path().join(n), t).unwrap();
        }
        d
    }

    #[test]
    fn failure_entry() {
        let d = dir_with(&[("TEST-com.example.PovTest.xml", REPORT)]);
        let e = summarize_reports(d.path(), "com.example.PovTest", Some("pov"));
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].status, Status::Fail);
        assert_eq!(e[0].exception_type.as_deref(), Some("java.lang.AssertionError"));
        assert_eq!(e[0].first_failure_line.as_deref(), Some("java.lang.AssertionError: boom"));
        assert_eq!(e[0].duration_s, Some(0.042));
    }

    #[test]
    fn class_and_method_filters() {
        let d = dir_with(&[("TEST-x.xml", REPORT)]);
        assert_eq!(summarize_reports(d.path(), "PovTest", None).len(), 3);
        assert_eq!(summarize_reports(d.path(), "PovTest", Some("ok"))[0].status, Status::Pass);
        assert!(summarize_reports(d.path(), "com.example.OtherTest", None).is_empty());
        assert!(summarize_reports(&d.path().join("missing"), "PovTest", None).is_empty());
    }

    #[test]
    fn truncated_report_is_error_entry() {
        let d = dir_with(&[("TEST-x.xml", &REPORT[..200])]);
        let e = summarize_reports(d.path(), "com.example.PovTest", Some("pov"));
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].status, Status::Error);
        assert!(e[0].first_failure_line.as_deref().unwrap().starts_with("unreadable test report TEST-x.xml"));
    }

    #[test]
    fn exception_type_from_trace_when_attribute_missing() {
        let xml = r#"<testsuite><testcase classname="A" name="t"><error>java.io.IOException: nope
  at A.t(A.java:3)</error></testcase></testsuite>"#;
        let d = dir_with(&[("r.xml", xml)]);
        let e = summarize_reports(d.path(), "A", Some("t"));
        assert_eq!(e[0].status, Status::Error);
        assert_eq!(e[0].exception_type.as_deref(), Some("java.io.IOException"));
        assert_eq!(e[0].duration_s, None);
    }
}
