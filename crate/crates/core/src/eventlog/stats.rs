use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Label, LabeledLog};

/// Duplicate statistics for one class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassStats {
    pub trace_count: usize,
    pub unique_count: usize,
    pub unique_pct: f64,
    /// Share of all traces covered by the ten most frequent sequences.
    pub top10_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogStats {
    pub positive: ClassStats,
    pub negative: ClassStats,
}

impl LogStats {
    pub fn class(&self, label: Label) -> &ClassStats {
        match label {
            Label::Positive => &self.positive,
            Label::Negative => &self.negative,
        }
    }
}

pub fn compute_stats(log: &LabeledLog) -> LogStats {
    LogStats {
        positive: class_stats(log, Label::Positive),
        negative: class_stats(log, Label::Negative),
    }
}

fn class_stats(log: &LabeledLog, label: Label) -> ClassStats {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    for t in log.class(label) {
        *counts.entry(t.activities.as_slice()).or_default() += 1;
    }
    let trace_count: usize = counts.values().sum();
    if trace_count == 0 {
        return ClassStats::default();
    }
    let mut freq: Vec<usize> = counts.values().copied().collect();
    freq.sort_unstable_by(|a, b| b.cmp(a));
    let top10: usize = freq.iter().take(10).sum();
    ClassStats {
        trace_count,
        unique_count: freq.len(),
        unique_pct: 100.0 * freq.len() as f64 / trace_count as f64,
        top10_pct: 100.0 * top10 as f64 / trace_count as f64,
    }
}
