//! Evaluation arithmetic: compilability, demonstration, judge and
//! self-critique accuracy, call-path precision and recall.

mod labels;
mod report;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assess::Verdict;
use crate::corpus::AttackCategory;
use crate::testgen::{Claim, SelfCritique};

pub use labels::{load_labels, parse_labels, FailedCondition, KnownEntryPoint, Label, Labels, LabelsError};
pub use report::{emit_report, render_table, TableRow};

/// An exact fraction. A zero denominator means undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    /// Integer percent, rounded half up.
    pub fn percent(self) -> Option<u64> {
        (self.den != 0).then(|| (200 * self.num + self.den) / (2 * self.den))
    }

    /// `55%`, or `n/a` when undefined.
    pub fn display(self) -> String {
        self.percent().map_or_else(|| "n/a".to_string(), |p| format!("{p}%"))
    }

    /// Harmonic mean of two fractions, kept exact.
    pub fn harmonic_mean(p: Ratio, r: Ratio) -> Ratio {
        let den = p.num * r.den + p.den * r.num;
        if p.den == 0 || r.den == 0 || den == 0 {
            return Ratio::new(0, 0);
        }
        Ratio::new(2 * p.num * r.num, den)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

#[derive(Serialize, Deserialize)]
struct RatioRepr {
    num: u64,
    den: u64,
    #[serde(default)]
    percent: Option<u64>,
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RatioRepr {
            num: self.num,
            den: self.den,
            percent: self.percent(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = RatioRepr::deserialize(d)?;
        Ok(Ratio::new(r.num, r.den))
    }
}

/// Everything known about one generation task after all phases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub path_length: usize,
    pub attack_category: AttackCategory,
    pub compiled: bool,
    /// Ground-truth label.
    pub demonstrated: bool,
    pub critique: SelfCritique,
    /// Absent when the task never reached the judge.
    pub verdict: Option<Verdict>,
    pub attempts: u32,
}

impl TaskOutcome {
    fn judged_triggered(&self) -> bool {
        self.verdict.as_ref().is_some_and(Verdict::triggered)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CallPathStats {
    pub reported: u64,
    pub correct: u64,
    pub known_relevant: u64,
    pub found_relevant: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallPathMetrics {
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
}

impl CallPathStats {
    pub fn metrics(&self) -> CallPathMetrics {
        let precision = Ratio::new(self.correct, self.reported);
        let recall = Ratio::new(self.found_relevant, self.known_relevant);
        CallPathMetrics {
            precision,
            recall,
            f1: Ratio::harmonic_mean(precision, recall),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CritiqueAccuracy {
    pub compile: Ratio,
    pub demo: Ratio,
    /// Tasks the agent claimed compile / demonstrate.
    pub compile_claimed: u64,
    pub demo_claimed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentAccuracy {
    /// Effective judgment agrees with the label.
    pub overall: Ratio,
    /// Among tasks judged triggered, share actually demonstrated.
    pub triggered: Ratio,
    /// Among tasks judged not triggered, share actually not demonstrated.
    pub not_triggered: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub total: u64,
    pub demonstrated: u64,
    pub dr: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakdowns {
    pub by_category: Vec<GroupRow>,
    pub by_length: Vec<GroupRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: u64,
    pub c: u64,
    pub cr: Ratio,
    pub d: u64,
    pub dr: Ratio,
    pub a: AssessmentAccuracy,
    pub critique: CritiqueAccuracy,
    pub breakdowns: Breakdowns,
    pub callpaths: Option<CallPathMetrics>,
    pub mean_attempts: Ratio,
}

fn count<F: Fn(&TaskOutcome) -> bool>(outcomes: &[TaskOutcome], f: F) -> u64 {
    outcomes.iter().filter(|o| f(o)).count() as u64
}

fn claim_matches(claim: Claim, truth: bool) -> bool {
    matches!((claim, truth), (Claim::Yes, true) | (Claim::No, false))
}

/// Self-critique accuracy; unknown claims count as wrong.
pub fn critique_accuracy(outcomes: &[TaskOutcome]) -> CritiqueAccuracy {
    let n = outcomes.len() as u64;
    CritiqueAccuracy {
        compile: Ratio::new(count(outcomes, |o| claim_matches(o.critique.compiled_claim, o.compiled)), n),
        demo: Ratio::new(count(outcomes, |o| claim_matches(o.critique.demonstrated_claim, o.demonstrated)), n),
        compile_claimed: count(outcomes, |o| o.critique.compiled_claim == Claim::Yes),
        demo_claimed: count(outcomes, |o| o.critique.demonstrated_claim == Claim::Yes),
    }
}

fn row(group: &str, members: &[&TaskOutcome]) -> GroupRow {
    let total = members.len() as u64;
    let demonstrated = members.iter().filter(|o| o.demonstrated).count() as u64;
    GroupRow {
        group: group.to_string(),
        total,
        demonstrated,
        dr: Ratio::new(demonstrated, total),
    }
}

/// Demonstration rate per attack category and per path length (1 vs
/// longer). Empty groups are left out.
pub fn breakdowns(outcomes: &[TaskOutcome]) -> Breakdowns {
    let by_category = AttackCategory::ALL
        .iter()
        .map(|c| row(c.as_str(), &outcomes.iter().filter(|o| o.attack_category == *c).collect::<Vec<_>>()))
        .filter(|r| r.total > 0)
        .collect();
    let short: Vec<&TaskOutcome> = outcomes.iter().filter(|o| o.path_length <= 1).collect();
    let long: Vec<&TaskOutcome> = outcomes.iter().filter(|o| o.path_length > 1).collect();
    let by_length = [row("1", &short), row(">1", &long)].into_iter().filter(|r| r.total > 0).collect();
    Breakdowns { by_category, by_length }
}

pub fn compute(outcomes: &[TaskOutcome], callpaths: Option<CallPathStats>) -> MetricsReport {
    let total = outcomes.len() as u64;
    let c = count(outcomes, |o| o.compiled);
    let d = count(outcomes, |o| o.demonstrated);
    let judged_yes = count(outcomes, TaskOutcome::judged_triggered);
    let right_yes = count(outcomes, |o| o.judged_triggered() && o.demonstrated);
    let right_no = count(outcomes, |o| !o.judged_triggered() && !o.demonstrated);
    MetricsReport {
        total,
        c,
        cr: Ratio::new(c, total),
        d,
        dr: Ratio::new(d, total),
        a: AssessmentAccuracy {
            overall: Ratio::new(right_yes + right_no, total),
            triggered: Ratio::new(right_yes, judged_yes),
            not_triggered: Ratio::new(right_no, total - judged_yes),
        },
        critique: critique_accuracy(outcomes),
        breakdowns: breakdowns(outcomes),
        callpaths: callpaths.map(|s| s.metrics()),
        mean_attempts: Ratio::new(outcomes.iter().map(|o| u64::from(o.attempts)).sum(), total),
    }
}
