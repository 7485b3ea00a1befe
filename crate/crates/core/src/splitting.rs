//! Duplicate-aware stratified train/test split.
//!
//! Splitting happens over *unique* activity sequences, independently per
//! class. Every occurrence of a train sequence goes to train; a test sequence
//! contributes exactly one trace to test. Sequences observed in both classes
//! are always kept in train so the test set never holds one sequence with two
//! labels.
//!
//! Shuffling is a Fisher–Yates shuffle (`rand::seq::SliceRandom::shuffle`)
//! driven by ChaCha8 seeded with the split seed; the positive class is
//! shuffled first, then the negative class, from the same stream.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{Label, LabeledLog};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: LabeledLog,
    pub test: LabeledLog,
    pub assignment: BTreeMap<Vec<String>, Side>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentEntry {
    pub activities: Vec<String>,
    pub side: Side,
}

/// Persisted form of a split, enough to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub test_fraction: f64,
    pub assignment: Vec<AssignmentEntry>,
}

impl DataSplit {
    pub fn manifest(&self, cfg: &SplitConfig) -> SplitManifest {
        SplitManifest {
            seed: cfg.seed,
            test_fraction: cfg.test_fraction,
            assignment: self
                .assignment
                .iter()
                .map(|(k, v)| AssignmentEntry {
                    activities: k.clone(),
                    side: *v,
                })
                .collect(),
        }
    }
}

impl SplitManifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::file(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), self)?;
        Ok(())
    }
}

fn unique_in_order(log: &LabeledLog, label: Label) -> Vec<&[String]> {
    let mut seen = HashSet::new();
    log.class(label)
        .map(|t| t.activities.as_slice())
        .filter(|s| seen.insert(*s))
        .collect()
}

pub fn split(log: &LabeledLog, cfg: &SplitConfig) -> Result<DataSplit> {
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction must lie in (0, 1), got {}",
            cfg.test_fraction
        )));
    }
    let pos = unique_in_order(log, Label::Positive);
    let neg = unique_in_order(log, Label::Negative);
    let pos_set: HashSet<&[String]> = pos.iter().copied().collect();
    let neg_set: HashSet<&[String]> = neg.iter().copied().collect();

    let mut rng = seed::rng(cfg.seed);
    let mut assignment: HashMap<&[String], Side> = HashMap::new();
    for (label, uniques, other) in [
        (Label::Positive, &pos, &neg_set),
        (Label::Negative, &neg, &pos_set),
    ] {
        let u = uniques.len();
        if u < 2 {
            return Err(Error::Precondition(format!(
                "class {label} has {u} unique sequence(s); at least 2 are needed to split"
            )));
        }
        let mut candidates: Vec<&[String]> = Vec::with_capacity(u);
        for s in uniques.iter() {
            if other.contains(s) {
                assignment.insert(s, Side::Train);
            } else {
                candidates.push(s);
            }
        }
        candidates.shuffle(&mut rng);
        // train share is ceil((1 - f) * U); the epsilon absorbs representation error in f
        let n_test = ((cfg.test_fraction * u as f64 + 1e-9).floor() as usize).min(candidates.len());
        if n_test == 0 {
            return Err(Error::Precondition(format!(
                "class {label} has {u} unique sequence(s) ({} usable), too few for a test share of {}",
                candidates.len(),
                cfg.test_fraction
            )));
        }
        let n_train = candidates.len() - n_test;
        for (i, s) in candidates.into_iter().enumerate() {
            assignment.insert(s, if i < n_train { Side::Train } else { Side::Test });
        }
    }

    let mut train = LabeledLog::new(log.name.clone());
    let mut test = LabeledLog::new(log.name.clone());
    let mut emitted: HashSet<&[String]> = HashSet::new();
    for t in &log.traces {
        let key = t.trace.activities.as_slice();
        match assignment[key] {
            Side::Train => train.push(t.trace.clone(), t.label),
            Side::Test => {
                if emitted.insert(key) {
                    test.push(t.trace.clone(), t.label);
                }
            }
        }
    }
    let assignment = assignment.into_iter().map(|(k, v)| (k.to_vec(), v)).collect();
    Ok(DataSplit {
        train,
        test,
        assignment,
    })
}
