use std::fmt::Write;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::{MetricsReport, Ratio};
use crate::workspace::write_json;

/// One line of the tool comparison table. `None` cells print as `-`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub tool: String,
    pub self_compile: Option<u64>,
    pub self_demo: Option<u64>,
    pub c: u64,
    pub cr: Ratio,
    pub d: u64,
    pub dr: Ratio,
    pub a: Option<Ratio>,
}

impl TableRow {
    pub fn from_report(tool: &str, r: &MetricsReport) -> Self {
        Self {
            tool: tool.to_string(),
            self_compile: Some(r.critique.compile_claimed),
            self_demo: Some(r.critique.demo_claimed),
            c: r.c,
            cr: r.cr,
            d: r.d,
            dr: r.dr,
            a: Some(r.a.overall),
        }
    }

    fn cells(&self) -> [String; 8] {
        let opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |n| n.to_string());
        [
            self.tool.clone(),
            opt(self.self_compile),
            opt(self.self_demo),
            self.c.to_string(),
            self.cr.display(),
            self.d.to_string(),
            self.dr.display(),
            self.a.map_or_else(|| "-".to_string(), |a| format!("{} ({}/{})", a.display(), a.num, a.den)),
        ]
    }
}

/// Markdown table with the self-critique, test quality and judge columns.
pub fn render_table(rows: &[TableRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| Tool | Self-critique: compile? | Self-critique: demoed? | C | CR | D | DR | A |");
    let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|---:|---:|");
    for r in rows {
        let _ = writeln!(s, "| {} |", r.cells().join(" | "));
    }
    s
}

fn render_markdown(tool: &str, r: &MetricsReport) -> String {
    let mut s = String::new();
    let rows: Vec<TableRow> = if r.total > 0 { vec![TableRow::from_report(tool, r)] } else { vec![] };
    let _ = writeln!(s, "# PoV generation report");
    let _ = writeln!(s);
    let _ = writeln!(s, "Tasks: {}", r.total);
    let _ = writeln!(s);
    let _ = writeln!(s, "## Test quality");
    let _ = writeln!(s);
    s.push_str(&render_table(&rows));
    let _ = writeln!(s);

    let _ = writeln!(s, "## Demonstration by attack category");
    let _ = writeln!(s);
    let _ = writeln!(s, "| Category | Tasks | D | DR |");
    let _ = writeln!(s, "|---|---:|---:|---:|");
    for g in &r.breakdowns.by_category {
        let _ = writeln!(s, "| {} | {} | {} | {} |", g.group, g.total, g.demonstrated, g.dr);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "## Demonstration by call-path length");
    let _ = writeln!(s);
    let _ = writeln!(s, "| Length | Tasks | D | DR |");
    let _ = writeln!(s, "|---|---:|---:|---:|");
    for g in &r.breakdowns.by_length {
        let _ = writeln!(s, "| {} | {} | {} | {} |", g.group, g.total, g.demonstrated, g.dr);
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "## Judge accuracy");
    let _ = writeln!(s);
    let _ = writeln!(s, "| Judged | Tasks | Correct | Accuracy |");
    let _ = writeln!(s, "|---|---:|---:|---:|");
    if r.total > 0 {
        for (name, x) in [("triggered", r.a.triggered), ("not triggered", r.a.not_triggered), ("all", r.a.overall)] {
            let _ = writeln!(s, "| {name} | {} | {} | {x} |", x.den, x.num);
        }
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "## Self-critique accuracy");
    let _ = writeln!(s);
    let _ = writeln!(s, "| Claim | Correct | Accuracy |");
    let _ = writeln!(s, "|---|---:|---:|");
    if r.total > 0 {
        for (name, x) in [("compiles", r.critique.compile), ("triggers", r.critique.demo)] {
            let _ = writeln!(s, "| {name} | {}/{} | {x} |", x.num, x.den);
        }
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "## Call paths");
    let _ = writeln!(s);
    let _ = writeln!(s, "| Precision | Recall | F1 |");
    let _ = writeln!(s, "|---:|---:|---:|");
    if let Some(m) = &r.callpaths {
        let _ = writeln!(
            s,
            "| {} ({}/{}) | {} ({}/{}) | {} |",
            m.precision, m.precision.num, m.precision.den, m.recall, m.recall.num, m.recall.den, m.f1
        );
    }
    s
}

/// Write `metrics.json` (exact ratios) and `table.md` into `out_dir`.
pub fn emit_report(report: &MetricsReport, tool: &str, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let json = out_dir.join("metrics.json");
    let table = out_dir.join("table.md");
    write_json(&json, report)?;
    fs::write(&table, render_markdown(tool, report))?;
    Ok(vec![json, table])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::compute;
    use tempfile::TempDir;

    fn published_row(tool: &str, sc: u64, sd: u64, c: u64, d: u64, a: u64) -> TableRow {
        TableRow {
            tool: tool.into(),
            self_compile: Some(sc),
            self_demo: Some(sd),
            c,
            cr: Ratio::new(c, 33),
            d,
            dr: Ratio::new(d, 33),
            a: Some(Ratio::new(a, 33)),
        }
    }

    #[test]
    fn comparison_rows() {
        let prior = TableRow {
            tool: "prior".into(),
            self_compile: None,
            self_demo: None,
            c: 16,
            cr: Ratio::new(16, 33),
            d: 5,
            dr: Ratio::new(5, 33),
            a: None,
        };
        let t = render_table(&[published_row("codex", 32, 31, 31, 23, 24), published_row("gemini", 21, 13, 23, 11, 26), prior]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[2], "| codex | 32 | 31 | 31 | 94% | 23 | 70% | 73% (24/33) |");
        assert_eq!(lines[3], "| gemini | 21 | 13 | 23 | 70% | 11 | 33% | 79% (26/33) |");
        assert_eq!(lines[4], "| prior | - | - | 16 | 48% | 5 | 15% | - |");
    }

    #[test]
    fn zero_task_report_has_header_only_tables() {
        let dir = TempDir::new().unwrap();
        let files = emit_report(&compute(&[], None), "x", dir.path()).unwrap();
        let md = fs::read_to_string(&files[1]).unwrap();
        for line in md.lines().filter(|l| l.starts_with('|')) {
            assert!(line.starts_with("| Tool") || line.starts_with("|--") || line.starts_with("|---") || line.contains("Tasks") || line.contains("Correct") || line.contains("Precision"), "{line}");
        }
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(json["dr"]["percent"], serde_json::Value::Null);
    }
}
