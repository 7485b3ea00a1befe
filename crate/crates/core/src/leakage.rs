//! Detection and removal of activities that trivially reveal the label.
//!
//! Two leak shapes are recognised: an activity that only ever occurs in one
//! class, and an activity that is the final event of every trace of one class
//! and of no trace of the other (while still occurring elsewhere in both).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{Label, LabeledLog, LabeledTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakMode {
    ClassExclusive,
    PositionalEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakFinding {
    pub activity: String,
    pub mode: LeakMode,
    /// The class the activity (or its final position) is exclusive to.
    pub class: Label,
    /// Fraction of that class's traces containing the activity.
    pub support: f64,
}

/// An activity that is almost, but not exactly, exclusive to one class.
/// Reported as a warning only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearLeak {
    pub activity: String,
    pub class: Label,
    /// Fraction of the traces containing the activity that belong to `class`.
    pub purity: f64,
    pub support: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub near_leak_threshold: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            near_leak_threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditReport {
    pub findings: Vec<LeakFinding>,
    pub near_leaks: Vec<NearLeak>,
}

#[derive(Default)]
struct ClassCounts<'a> {
    traces: usize,
    containing: HashMap<&'a str, usize>,
    ending: HashMap<&'a str, usize>,
}

fn count_class<'a>(log: &'a LabeledLog, label: Label) -> ClassCounts<'a> {
    let mut c = ClassCounts::default();
    for t in log.class(label) {
        c.traces += 1;
        let mut seen: Vec<&str> = t.activities.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for a in seen {
            *c.containing.entry(a).or_default() += 1;
        }
        if let Some(last) = t.last_activity() {
            *c.ending.entry(last).or_default() += 1;
        }
    }
    c
}

pub fn audit(log: &LabeledLog) -> Result<Vec<LeakFinding>> {
    Ok(audit_with(log, &AuditConfig::default())?.findings)
}

pub fn audit_with(log: &LabeledLog, cfg: &AuditConfig) -> Result<AuditReport> {
    let pos = count_class(log, Label::Positive);
    let neg = count_class(log, Label::Negative);
    if pos.traces == 0 || neg.traces == 0 {
        return Err(Error::Precondition(
            "leakage audit needs traces of both classes".into(),
        ));
    }
    let counts = |l: Label| if l.is_positive() { &pos } else { &neg };

    let mut activities: Vec<&str> = pos
        .containing
        .keys()
        .chain(neg.containing.keys())
        .copied()
        .collect();
    activities.sort_unstable();
    activities.dedup();

    let mut report = AuditReport::default();
    for a in activities {
        for class in Label::BOTH {
            let own = counts(class);
            let other = counts(class.other());
            let in_own = own.containing.get(a).copied().unwrap_or(0);
            let in_other = other.containing.get(a).copied().unwrap_or(0);
            if in_own == 0 {
                continue;
            }
            let support = in_own as f64 / own.traces as f64;
            if in_other == 0 {
                report.findings.push(LeakFinding {
                    activity: a.to_owned(),
                    mode: LeakMode::ClassExclusive,
                    class,
                    support,
                });
                continue;
            }
            let ends_own = own.ending.get(a).copied().unwrap_or(0);
            let ends_other = other.ending.get(a).copied().unwrap_or(0);
            if ends_own == own.traces && ends_other == 0 {
                report.findings.push(LeakFinding {
                    activity: a.to_owned(),
                    mode: LeakMode::PositionalEnd,
                    class,
                    support,
                });
            }
            let purity = in_own as f64 / (in_own + in_other) as f64;
            if purity >= cfg.near_leak_threshold {
                report.near_leaks.push(NearLeak {
                    activity: a.to_owned(),
                    class,
                    purity,
                    support,
                });
            }
        }
    }
    report.findings.sort_by(|x, y| {
        y.support
            .total_cmp(&x.support)
            .then_with(|| x.activity.cmp(&y.activity))
            .then_with(|| x.mode.cmp(&y.mode))
    });
    report.near_leaks.sort_by(|x, y| {
        y.purity
            .total_cmp(&x.purity)
            .then_with(|| x.activity.cmp(&y.activity))
    });
    Ok(report)
}

/// Where an activity is removed, and from which class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scope", content = "class", rename_all = "snake_case")]
pub enum RemovalScope {
    Everywhere(Label),
    LastEventOnly(Label),
}

impl RemovalScope {
    pub fn class(self) -> Label {
        match self {
            RemovalScope::Everywhere(c) | RemovalScope::LastEventOnly(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub activity: String,
    #[serde(flatten)]
    pub scope: RemovalScope,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BiasRemovalSpec {
    pub removals: Vec<Removal>,
}

impl BiasRemovalSpec {
    /// Class-exclusive findings are removed everywhere in their class,
    /// positional ones only as final event.
    pub fn from_findings(findings: &[LeakFinding]) -> Self {
        let removals = findings
            .iter()
            .map(|f| Removal {
                activity: f.activity.clone(),
                scope: match f.mode {
                    LeakMode::ClassExclusive => RemovalScope::Everywhere(f.class),
                    LeakMode::PositionalEnd => RemovalScope::LastEventOnly(f.class),
                },
            })
            .collect();
        BiasRemovalSpec { removals }
    }

    pub fn merge(mut self, other: BiasRemovalSpec) -> Self {
        for r in other.removals {
            if !self.removals.contains(&r) {
                self.removals.push(r);
            }
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.removals.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RemovalSummary {
    pub removed_events: usize,
    pub dropped_traces: usize,
}

/// Apply a removal spec. Traces left without events are dropped.
pub fn remove_bias(log: &LabeledLog, spec: &BiasRemovalSpec) -> Result<(LabeledLog, RemovalSummary)> {
    if spec.is_empty() {
        return Ok((log.clone(), RemovalSummary::default()));
    }
    let known = log.activities();
    for r in &spec.removals {
        if known.binary_search(&r.activity).is_err() {
            return Err(Error::UnknownActivity {
                activity: r.activity.clone(),
                known,
            });
        }
        if log.class_count(r.scope.class()) == 0 {
            return Err(Error::Precondition(format!(
                "removal of '{}' targets class {} which has no traces",
                r.activity,
                r.scope.class()
            )));
        }
    }

    let mut summary = RemovalSummary::default();
    let mut out = LabeledLog::new(log.name.clone());
    for LabeledTrace { trace, label } in &log.traces {
        let mut t = trace.clone();
        for r in spec.removals.iter().filter(|r| r.scope.class() == *label) {
            match r.scope {
                RemovalScope::Everywhere(_) => {
                    let before = t.activities.len();
                    t.activities.retain(|a| a != &r.activity);
                    summary.removed_events += before - t.activities.len();
                }
                RemovalScope::LastEventOnly(_) => {
                    if t.last_activity() == Some(r.activity.as_str()) {
                        t.activities.pop();
                        summary.removed_events += 1;
                    }
                }
            }
        }
        if t.activities.is_empty() {
            summary.dropped_traces += 1;
        } else {
            out.push(t, *label);
        }
    }
    if summary.dropped_traces > 0 {
        log::warn!(
            "bias removal emptied {} trace(s) of '{}'; they were dropped",
            summary.dropped_traces,
            log.name
        );
    }
    Ok((out, summary))
}

/// Per-class activity counts, handy for audit reports.
pub fn activity_class_counts(log: &LabeledLog) -> BTreeMap<String, [usize; 2]> {
    let mut out: BTreeMap<String, [usize; 2]> = BTreeMap::new();
    for t in &log.traces {
        let slot = usize::from(t.label.is_positive());
        let mut seen: Vec<&String> = t.trace.activities.iter().collect();
        seen.sort_unstable();
        seen.dedup();
        for a in seen {
            out.entry(a.clone()).or_default()[slot] += 1;
        }
    }
    out
}
