//! Synthetic labelled logs for demos and tests.
//!
//! Each class draws a pool of distinct sequences from its own Markov chain
//! (a shared random transition matrix, tilted towards a class-specific set
//! of activities by `signal`). Traces are then sampled from the pool with a
//! Zipf-skewed frequency, so a handful of variants dominate as in real logs.
//! A leak activity can be injected either into one class only or at the end
//! of one class while appearing mid-trace in the other.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, TimeZone, Utc};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{Label, LabeledLog, Trace};
use crate::seed;

const NAMES: [&str; 16] = [
    "Submit",
    "Review",
    "Approve",
    "Reject",
    "Request_Info",
    "Update",
    "Notify",
    "Validate",
    "Archive",
    "Escalate",
    "Call",
    "Check",
    "Assign",
    "Complete",
    "Cancel",
    "Reopen",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakKind {
    /// Present in every positive trace, never in a negative one.
    ClassExclusive,
    /// Last event of every positive trace; somewhere before the end in
    /// every negative trace.
    PositionalEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakSpec {
    pub activity: String,
    pub kind: LeakKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub name: String,
    pub n_traces: usize,
    pub positive_fraction: f64,
    pub n_activities: usize,
    /// Distinct sequences per class (capped by the class size).
    pub unique_per_class: usize,
    pub mean_len: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Strength of the class-dependent tilt of the transition matrix.
    pub signal: f64,
    /// Zipf exponent of variant frequencies; 0 gives uniform sampling.
    pub duplicate_skew: f64,
    /// Fraction of negative variants copied from the positive pool.
    pub cross_class_overlap: f64,
    pub leak: Option<LeakSpec>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            name: "synthetic".into(),
            n_traces: 600,
            positive_fraction: 0.5,
            n_activities: 10,
            unique_per_class: 150,
            mean_len: 8.0,
            min_len: 3,
            max_len: 20,
            signal: 0.6,
            duplicate_skew: 1.1,
            cross_class_overlap: 0.05,
            leak: None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return bad("positive_fraction must be in (0, 1)");
        }
        if self.n_activities < 2 {
            return bad("need at least two activities");
        }
        if self.min_len < 2 || self.max_len < self.min_len {
            return bad("need 2 <= min_len <= max_len");
        }
        if self.mean_len < self.min_len as f64 {
            return bad("mean_len must be at least min_len");
        }
        if self.unique_per_class == 0 || self.signal < 0.0 || self.duplicate_skew < 0.0 {
            return bad("unique_per_class must be positive, signal and skew non-negative");
        }
        if !(0.0..=1.0).contains(&self.cross_class_overlap) {
            return bad("cross_class_overlap must be in [0, 1]");
        }
        if let Some(leak) = &self.leak {
            if self.activity_names().contains(&leak.activity) {
                return bad("leak activity must not be one of the regular activities");
            }
        }
        Ok(())
    }

    /// Read settings from a `.toml` or `.json` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string())),
            _ => toml::from_str(&text).map_err(|e| Error::Config(e.to_string())),
        }
    }

    pub fn activity_names(&self) -> Vec<String> {
        (0..self.n_activities)
            .map(|i| {
                NAMES
                    .get(i)
                    .map_or_else(|| format!("Activity_{i}"), |s| (*s).to_owned())
            })
            .collect()
    }
}

struct Chain {
    start: Vec<f64>,
    transition: Vec<Vec<f64>>,
}

impl Chain {
    fn for_class(base: &[Vec<f64>], start: &[f64], favoured: &[bool], signal: f64) -> Chain {
        let tilt = |j: usize, w: f64| if favoured[j] { w * (1.0 + signal) } else { w };
        Chain {
            start: start.iter().enumerate().map(|(j, w)| tilt(j, *w)).collect(),
            transition: base
                .iter()
                .map(|row| row.iter().enumerate().map(|(j, w)| tilt(j, *w)).collect())
                .collect(),
        }
    }

    fn sample(&self, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let stop = 1.0 / (cfg.mean_len - cfg.min_len as f64 + 1.0);
        let mut seq = vec![WeightedIndex::new(&self.start)
            .expect("positive weights")
            .sample(rng)];
        while seq.len() < cfg.max_len {
            if seq.len() >= cfg.min_len && rng.gen_bool(stop) {
                break;
            }
            let last = *seq.last().expect("non-empty");
            seq.push(
                WeightedIndex::new(&self.transition[last])
                    .expect("positive weights")
                    .sample(rng),
            );
        }
        seq
    }
}

fn pool(chain: &Chain, cfg: &SynthConfig, size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(size);
    let mut attempts = 0usize;
    while out.len() < size {
        attempts += 1;
        if attempts > 1000 * size + 1000 {
            return Err(Error::Precondition(format!(
                "could only generate {} distinct sequences (wanted {size}); allow longer traces or more activities",
                out.len()
            )));
        }
        let s = chain.sample(cfg, rng);
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Draw `n` traces from `pool`: every variant once, the rest Zipf-weighted.
fn draw(pool: &[Vec<String>], n: usize, skew: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let weights: Vec<f64> = (0..pool.len())
        .map(|r| 1.0 / ((r + 1) as f64).powf(skew))
        .collect();
    let dist = WeightedIndex::new(&weights).expect("positive weights");
    let mut out: Vec<Vec<String>> = pool.iter().take(n).cloned().collect();
    while out.len() < n {
        out.push(pool[dist.sample(rng)].clone());
    }
    out
}

pub fn generate(cfg: &SynthConfig) -> Result<LabeledLog> {
    cfg.validate()?;
    let names = cfg.activity_names();
    let k = cfg.n_activities;
    let mut rng = seed::rng(seed::derive(cfg.seed, "synth-chain"));
    let base: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..k).map(|_| rng.gen_range(0.2..1.0)).collect())
        .collect();
    let start: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let favoured_pos: Vec<bool> = (0..k).map(|j| j % 2 == 0).collect();
    let favoured_neg: Vec<bool> = favoured_pos.iter().map(|f| !f).collect();

    let n_pos = ((cfg.n_traces as f64) * cfg.positive_fraction).round() as usize;
    let n_neg = cfg.n_traces - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidParameter(
            "both classes need at least one trace".into(),
        ));
    }

    let mut pools = Vec::new();
    for (label, n, favoured) in [
        (Label::Positive, n_pos, &favoured_pos),
        (Label::Negative, n_neg, &favoured_neg),
    ] {
        let chain = Chain::for_class(&base, &start, favoured, cfg.signal);
        let mut r = seed::rng(seed::derive(cfg.seed, &format!("synth-pool-{label}")));
        let p = pool(&chain, cfg, cfg.unique_per_class.min(n), &mut r)?;
        pools.push(p);
    }

    // Share some variants across classes.
    let shared = ((cfg.cross_class_overlap * pools[1].len() as f64).round() as usize)
        .min(pools[0].len())
        .min(pools[1].len());
    if shared > 0 {
        let pos_set: HashSet<&Vec<usize>> = pools[0].iter().collect();
        let own: Vec<Vec<usize>> = pools[1]
            .iter()
            .filter(|s| !pos_set.contains(s))
            .take(pools[1].len() - shared)
            .cloned()
            .collect();
        let copies: Vec<Vec<usize>> = pools[0][..shared].to_vec();
        // Interleave so shared variants get mid-range frequencies.
        let step = (own.len() / shared).max(1);
        let mut merged = Vec::with_capacity(own.len() + shared);
        let mut copies = copies.into_iter();
        for (i, s) in own.into_iter().enumerate() {
            if i % step == step / 2 {
                merged.extend(copies.next());
            }
            merged.push(s);
        }
        merged.extend(copies);
        pools[1] = merged;
    }

    let mut leak_rng = seed::rng(seed::derive(cfg.seed, "synth-leak"));
    let mut named: Vec<Vec<Vec<String>>> = pools
        .iter()
        .map(|p| {
            p.iter()
                .map(|s| s.iter().map(|&a| names[a].clone()).collect())
                .collect()
        })
        .collect();
    if let Some(leak) = &cfg.leak {
        for s in named[0].iter_mut() {
            match leak.kind {
                LeakKind::ClassExclusive => {
                    let at = leak_rng.gen_range(0..=s.len());
                    s.insert(at, leak.activity.clone());
                }
                LeakKind::PositionalEnd => s.push(leak.activity.clone()),
            }
        }
        if leak.kind == LeakKind::PositionalEnd {
            for s in named[1].iter_mut() {
                let at = leak_rng.gen_range(0..s.len());
                s.insert(at, leak.activity.clone());
            }
        }
    }

    let mut draw_rng = seed::rng(seed::derive(cfg.seed, "synth-draw"));
    let mut traces: Vec<(Vec<String>, Label)> = Vec::with_capacity(cfg.n_traces);
    for (p, label, n) in [
        (&named[0], Label::Positive, n_pos),
        (&named[1], Label::Negative, n_neg),
    ] {
        traces.extend(
            draw(p, n, cfg.duplicate_skew, &mut draw_rng)
                .into_iter()
                .map(|t| (t, label)),
        );
    }
    traces.shuffle(&mut draw_rng);

    let mut log = LabeledLog::new(cfg.name.clone());
    for (i, (acts, label)) in traces.into_iter().enumerate() {
        log.push(Trace::new(format!("case-{i:05}"), acts), label);
    }
    Ok(log)
}

/// Event-level CSV (`case,activity,timestamp,label`) with hourly timestamps.
pub fn write_csv_events(log: &LabeledLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    writeln!(w, "case,activity,timestamp,label")?;
    let origin = Utc
        .with_ymd_and_hms(2020, 1, 1, 8, 0, 0)
        .single()
        .expect("valid date");
    for (i, lt) in log.traces.iter().enumerate() {
        let start = origin + Duration::hours(i as i64 * 3);
        for (k, a) in lt.trace.activities.iter().enumerate() {
            let ts = start + Duration::minutes(k as i64 * 20);
            writeln!(
                w,
                "{},{},{},{}",
                lt.trace.case_id,
                a,
                ts.format("%Y-%m-%d %H:%M:%S"),
                lt.label
            )?;
        }
    }
    w.flush()?;
    Ok(())
}
