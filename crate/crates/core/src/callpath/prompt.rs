use std::fmt::Write;

use thiserror::Error;

use super::parse::{BLOCK_BEGIN, BLOCK_END, NO_PATHS};
use crate::corpus::ProgramPair;
use crate::signature::MethodSignature;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("sink `{sink}` is not in the vulnerable API list of `{pair_id}`")]
    UnknownSink { pair_id: String, sink: String },
}

/// Section headings of the call-path analysis prompt, in order.
pub const CALLPATH_SECTIONS: [&str; 3] = [
    "## Part 1: Goal Specification",
    "## Part 2: Procedure",
    "## Part 3: Output Format",
];

/// Render the call-path analysis prompt for one sink of `pair`.
pub fn render_callpath_prompt(pair: &ProgramPair, sink: &MethodSignature) -> Result<String, PromptError> {
    if !pair.vulnerability.lists_api(sink) {
        return Err(PromptError::UnknownSink {
            pair_id: pair.pair_id.clone(),
            sink: sink.to_string(),
        });
    }
    let vuln = &pair.vulnerability;
    let name = sink.method();
    let mut p = String::new();

    // Infallible: writing into a String.
    let _ = writeln!(p, "You are analyzing the Java project `{}` in the current working directory.", pair.pair_id);
    let _ = writeln!(p, "The project depends on {}, which contains a known vulnerability ({}).", pair.lib, vuln.vuln_id);
    let _ = writeln!(p);

    let _ = writeln!(p, "{}", CALLPATH_SECTIONS[0]);
    let _ = writeln!(p);
    let _ = writeln!(p, "Find every call path in this project's own source code that ends at the sink method:");
    let _ = writeln!(p);
    let _ = writeln!(p, "    {sink}");
    let _ = writeln!(p);
    let _ = writeln!(p, "The sink is written as ClassName.methodName(parameterlist). It is a vulnerable API of the");
    let _ = writeln!(p, "library (affected versions: {}). A call path starts at a source method of", vuln.affected_versions);
    let _ = writeln!(p, "this project and ends at a statement that invokes the sink.");
    let _ = writeln!(p);

    let _ = writeln!(p, "{}", CALLPATH_SECTIONS[1]);
    let _ = writeln!(p);
    let _ = writeln!(p, "Step 1. Locate every invocation of `{name}` on `{}` in the project's source files.", sink.class_name());
    let _ = writeln!(p, "Ignore test sources and generated code.");
    let _ = writeln!(p);
    let _ = writeln!(p, "Step 2. For each invocation, identify the call path that starts at a public method, ends at");
    let _ = writeln!(p, "the method containing the invocation, and has only non-public methods (private, protected,");
    let _ = writeln!(p, "or package-private) as intermediate nodes. The source must be declared public in a named");
    let _ = writeln!(p, "class; a public method of an anonymous class is not a source, and a protected method is not");
    let _ = writeln!(p, "a source. If a public method A calls another public method B that reaches the sink, report");
    let _ = writeln!(p, "only the path starting at B and do not report A: any input that reaches the sink through A");
    let _ = writeln!(p, "also reaches it through B.");
    let _ = writeln!(p);
    let _ = writeln!(p, "Step 3. Verify each source method you found: re-open its file, confirm the method is public,");
    let _ = writeln!(p, "declared outside any anonymous class, that each node calls the next one, and that the last");
    let _ = writeln!(p, "node invokes `{name}` directly. Drop any path that fails a check.");
    let _ = writeln!(p);

    let _ = writeln!(p, "{}", CALLPATH_SECTIONS[2]);
    let _ = writeln!(p);
    let _ = writeln!(p, "Report each path as one block, exactly in this form:");
    let _ = writeln!(p);
    let _ = writeln!(p, "{BLOCK_BEGIN}");
    let _ = writeln!(p, "sink: {sink}");
    let _ = writeln!(p, "1. <package.Class.sourceMethod(ParamTypes)> | public | <path/relative/to/project/File.java>:<line>");
    let _ = writeln!(p, "2. <package.Class.nextMethod(ParamTypes)> | <private|protected|package> | <path>:<line>");
    let _ = writeln!(p, "{BLOCK_END}");
    let _ = writeln!(p);
    let _ = writeln!(p, "- Node 1 is the source method; the last node is the method that invokes the sink.");
    let _ = writeln!(p, "- <line> is the line where the method's declaration (its name) appears.");
    let _ = writeln!(p, "- File paths are relative to the project root and use `/` separators.");
    let _ = writeln!(p, "- Put nothing else between {BLOCK_BEGIN} and {BLOCK_END}.");
    let _ = writeln!(p, "- If the sink has no qualifying call path, print a single line `{NO_PATHS}`.");
    Ok(p)
}
