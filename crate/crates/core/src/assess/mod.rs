//! Phase IV: an LLM judges whether a generated test demonstrates the
//! vulnerability, given the test and both execution logs.

mod judge;
mod prompt;

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use judge::{judge, load_verdict, JudgeOptions, VerdictRecord, DEFAULT_JUDGE_RETRIES};
pub use prompt::{
    load_assessment_input, render_assessment_prompt, AssessmentInput, ASSESS_SECTIONS, DEFAULT_LOG_BUDGET,
    TRUNCATION_MARKER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    Triggered,
    NotTriggered,
    Unknown,
}

impl Judgment {
    pub const ALL: [Judgment; 3] = [Judgment::Triggered, Judgment::NotTriggered, Judgment::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            Judgment::Triggered => "triggered",
            Judgment::NotTriggered => "not_triggered",
            Judgment::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    Medium,
    Low,
}

impl Confidence {
    pub const ALL: [Confidence; 3] = [Confidence::High, Confidence::Medium, Confidence::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Confidence::High => "high",
            Confidence::Medium => "medium",
            Confidence::Low => "low",
        }
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub judgment: Judgment,
    pub confidence: Confidence,
    pub explanation: String,
    /// Unknown counts as not triggered.
    pub effective_judgment: Judgment,
}

impl Verdict {
    pub fn new(judgment: Judgment, confidence: Confidence, explanation: impl Into<String>) -> Self {
        Self {
            judgment,
            confidence,
            explanation: explanation.into(),
            effective_judgment: effective(judgment),
        }
    }

    pub fn triggered(&self) -> bool {
        self.effective_judgment == Judgment::Triggered
    }
}

pub fn effective(j: Judgment) -> Judgment {
    match j {
        Judgment::Unknown => Judgment::NotTriggered,
        other => other,
    }
}

fn judgment_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\bjudgment\**\s*:\s*\**\s*(not[ _-]?triggered|triggered|unknown)\b").expect("valid regex")
    })
}

fn confidence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bconfidence\**\s*:\s*\**\s*(high|medium|low)\b").expect("valid regex"))
}

fn explanation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)\bexplanation\**\s*:[ \t]*(?:\*\*)?[ \t]*(.*)$").expect("valid regex"))
}

/// Parse a judge response. Never fails: anything without a judgment
/// field is unknown, with the raw output kept as the explanation. A
/// missing confidence reads as low.
pub fn parse_verdict(output: &str) -> Verdict {
    let Some(j) = judgment_re().captures(output) else {
        return Verdict::new(Judgment::Unknown, Confidence::Low, output);
    };
    let word = j[1].to_ascii_lowercase();
    let judgment = if word.starts_with("not") {
        Judgment::NotTriggered
    } else if word == "triggered" {
        Judgment::Triggered
    } else {
        Judgment::Unknown
    };
    let confidence = confidence_re()
        .captures(output)
        .map(|c| match c[1].to_ascii_lowercase().as_str() {
            "high" => Confidence::High,
            "medium" => Confidence::Medium,
            _ => Confidence::Low,
        })
        .unwrap_or(Confidence::Low);
    let explanation = explanation_re()
        .captures(output)
        .map(|c| c[1].trim().to_string())
        .unwrap_or_default();
    Verdict::new(judgment, confidence, explanation)
}

/// The text form `parse_verdict` reads.
pub fn render_verdict(v: &Verdict) -> String {
    format!("judgment: {}\nconfidence: {}\nexplanation: {}\n", v.judgment, v.confidence, v.explanation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schema_examples() {
        let v = parse_verdict("judgment: triggered / confidence: high / explanation: the assertion shows it");
        assert_eq!((v.judgment, v.confidence, v.effective_judgment), (Judgment::Triggered, Confidence::High, Judgment::Triggered));
        assert_eq!(v.explanation, "the assertion shows it");
        let v = parse_verdict("judgment: unknown\nconfidence: low\nexplanation: not enough log\n");
        assert_eq!(v.effective_judgment, Judgment::NotTriggered);
        let v = parse_verdict("I think the test looks fine overall.");
        assert_eq!(v.judgment, Judgment::Unknown);
        assert_eq!(v.effective_judgment, Judgment::NotTriggered);
        assert_eq!(v.explanation, "I think the test looks fine overall.");
    }

    #[test]
    fn tolerant_spellings() {
        let v = parse_verdict("**Judgment:** NOT TRIGGERED\n**Confidence:** Medium\n**Explanation:** build failed\nmore\n");
        assert_eq!((v.judgment, v.confidence), (Judgment::NotTriggered, Confidence::Medium));
        assert_eq!(v.explanation, "build failed\nmore");
        assert_eq!(parse_verdict("judgment: not-triggered").judgment, Judgment::NotTriggered);
        assert_eq!(parse_verdict("judgment: triggered").confidence, Confidence::Low);
    }

    #[test]
    fn render_parse_identity_for_all_pairs() {
        for j in Judgment::ALL {
            for c in Confidence::ALL {
                let v = Verdict::new(j, c, "because\nof the log");
                assert_eq!(parse_verdict(&render_verdict(&v)), v);
            }
        }
    }

    proptest! {
        #[test]
        fn parse_is_total_and_applies_policy(text in ".{0,300}") {
            let v = parse_verdict(&text);
            prop_assert_eq!(v.effective_judgment, effective(v.judgment));
            prop_assert_ne!(v.effective_judgment, Judgment::Unknown);
        }
    }
}
