//! Event logs: parsing, trace grouping, labeling and duplicate statistics.

mod csv;
mod rules;
mod stats;
mod xes;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{parse_csv, parse_csv_reader, ColumnRef, CsvSchema};
pub use rules::{apply_rule, LabelRule, RuleKind, RuleSpec};
pub use stats::{compute_stats, ClassStats, LogStats};
pub use xes::{parse_xes, parse_xes_reader};

/// A single activity execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub case_id: String,
    pub activity: String,
    pub timestamp: Option<DateTime<Utc>>,
}

/// The ordered activity sequence of one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub case_id: String,
    pub activities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<DateTime<Utc>>,
}

impl Trace {
    pub fn new<S: Into<String>>(case_id: impl Into<String>, activities: impl IntoIterator<Item = S>) -> Self {
        Trace {
            case_id: case_id.into(),
            activities: activities.into_iter().map(Into::into).collect(),
            start: None,
            end: None,
        }
    }

    pub fn with_span(mut self, start: DateTime<Utc>, end: DateTime<Utc>) -> Self {
        self.start = Some(start);
        self.end = Some(end);
        self
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    pub fn last_activity(&self) -> Option<&str> {
        self.activities.last().map(String::as_str)
    }

    pub fn contains(&self, activity: &str) -> bool {
        self.activities.iter().any(|a| a == activity)
    }

    /// Group events into traces, one per case id in order of first appearance.
    ///
    /// Events of a case are ordered by timestamp when every event of that case
    /// carries one; ties (and cases lacking timestamps) keep input order.
    pub fn group(events: impl IntoIterator<Item = Event>) -> Vec<Trace> {
        let mut order: Vec<String> = Vec::new();
        let mut by_case: std::collections::HashMap<String, Vec<Event>> = Default::default();
        for ev in events {
            if !by_case.contains_key(&ev.case_id) {
                order.push(ev.case_id.clone());
            }
            by_case.entry(ev.case_id.clone()).or_default().push(ev);
        }
        order
            .into_iter()
            .map(|case_id| {
                let mut evs = by_case.remove(&case_id).unwrap_or_default();
                let timed = evs.iter().all(|e| e.timestamp.is_some());
                if timed {
                    // stable sort keeps file order for equal timestamps
                    evs.sort_by_key(|e| e.timestamp);
                }
                let start = evs.iter().filter_map(|e| e.timestamp).min();
                let end = evs.iter().filter_map(|e| e.timestamp).max();
                Trace {
                    case_id,
                    activities: evs.into_iter().map(|e| e.activity).collect(),
                    start,
                    end,
                }
            })
            .collect()
    }
}

/// Binary outcome label. Positive is the desirable class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Positive, Label::Negative];

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn as_f64(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            0.0
        }
    }

    pub fn other(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => f.write_str("positive"),
            Label::Negative => f.write_str("negative"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTrace {
    pub trace: Trace,
    pub label: Label,
}

/// One line of the labeled-log interchange file.
#[derive(Debug, Serialize, Deserialize)]
struct LogRecord {
    case_id: String,
    label: Label,
    activities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledLog {
    pub name: String,
    pub traces: Vec<LabeledTrace>,
}

impl LabeledLog {
    pub fn new(name: impl Into<String>) -> Self {
        LabeledLog {
            name: name.into(),
            traces: Vec::new(),
        }
    }

    pub fn push(&mut self, trace: Trace, label: Label) {
        self.traces.push(LabeledTrace { trace, label });
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.traces.iter().map(|t| t.label).collect()
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.traces.iter().filter(|t| t.label == label).count()
    }

    pub fn class(&self, label: Label) -> impl Iterator<Item = &Trace> {
        self.traces
            .iter()
            .filter(move |t| t.label == label)
            .map(|t| &t.trace)
    }

    /// All distinct activity names, sorted.
    pub fn activities(&self) -> Vec<String> {
        let set: std::collections::BTreeSet<&str> = self
            .traces
            .iter()
            .flat_map(|t| t.trace.activities.iter().map(String::as_str))
            .collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Keep only traces containing at least one of `activities`.
    ///
    /// Used to drop ongoing cases that never reached a terminal activity.
    pub fn retain_containing_any(&mut self, activities: &[String]) -> usize {
        let wanted: HashSet<&str> = activities.iter().map(String::as_str).collect();
        let before = self.traces.len();
        self.traces
            .retain(|t| t.trace.activities.iter().any(|a| wanted.contains(a.as_str())));
        before - self.traces.len()
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.traces {
            let rec = LogRecord {
                case_id: t.trace.case_id.clone(),
                label: t.label,
                activities: t.trace.activities.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(name: impl Into<String>, r: R) -> Result<Self> {
        let mut log = LabeledLog::new(name);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(&line).map_err(|e| Error::Row {
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
            if rec.activities.is_empty() {
                return Err(Error::Row {
                    line: i as u64 + 1,
                    message: format!("case '{}' has no activities", rec.case_id),
                });
            }
            log.push(Trace::new(rec.case_id, rec.activities), rec.label);
        }
        Ok(log)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_ndjson(BufWriter::new(f))
    }

    /// Load a labeled log; its name is the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::file(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::read_ndjson(name, BufReader::new(f))
    }
}

/// Write unlabeled traces (with their time span) as newline-delimited JSON.
pub fn write_traces<W: Write>(traces: &[Trace], mut w: W) -> Result<()> {
    for t in traces {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_traces<R: BufRead>(r: R) -> Result<Vec<Trace>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Trace = serde_json::from_str(&line).map_err(|e| Error::Row {
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}
