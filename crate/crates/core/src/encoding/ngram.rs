use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::dictionary::{END, PAD, START};
use crate::error::{Error, Result};
use crate::eventlog::{LabeledLog, Trace};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramConfig {
    pub n: usize,
    /// Presence (0/1) instead of counts.
    #[serde(default)]
    pub binary: bool,
    /// Pad the boundary-extended trace with `<pad>` up to this length before
    /// extracting grams. Off by default.
    #[serde(default)]
    pub pad_to: Option<usize>,
}

impl NGramConfig {
    pub fn counts(n: usize) -> Self {
        NGramConfig {
            n,
            binary: false,
            pad_to: None,
        }
    }
}

/// Sparse gram counts for one trace.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NGramVector {
    pub counts: BTreeMap<usize, u32>,
    pub dim: usize,
}

impl NGramVector {
    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn get(&self, col: usize) -> u32 {
        self.counts.get(&col).copied().unwrap_or(0)
    }
}

/// Gram → column index, sorted lexicographically by gram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramVocabulary {
    config: NGramConfig,
    grams: Vec<Vec<String>>,
    index: HashMap<Vec<String>, usize>,
}

fn extended(trace: &Trace, pad_to: Option<usize>) -> Vec<&str> {
    let mut seq = Vec::with_capacity(trace.len() + 2);
    seq.push(START);
    seq.extend(trace.activities.iter().map(String::as_str));
    seq.push(END);
    if let Some(l) = pad_to {
        while seq.len() < l {
            seq.push(PAD);
        }
    }
    seq
}

impl NGramVocabulary {
    pub fn fit<'a>(traces: impl IntoIterator<Item = &'a Trace>, config: NGramConfig) -> Result<Self> {
        if !(1..=3).contains(&config.n) {
            return Err(Error::InvalidParameter(format!(
                "n-gram order must be 1, 2 or 3, got {}",
                config.n
            )));
        }
        let mut set: BTreeSet<Vec<String>> = BTreeSet::new();
        for t in traces {
            for w in extended(t, config.pad_to).windows(config.n) {
                if !set.contains(w.iter().map(|s| s.to_string()).collect::<Vec<_>>().as_slice()) {
                    set.insert(w.iter().map(|s| s.to_string()).collect());
                }
            }
        }
        Ok(Self::from_grams(config, set.into_iter().collect()))
    }

    pub fn fit_log(train: &LabeledLog, config: NGramConfig) -> Result<Self> {
        Self::fit(train.traces.iter().map(|t| &t.trace), config)
    }

    fn from_grams(config: NGramConfig, grams: Vec<Vec<String>>) -> Self {
        let index = grams.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        NGramVocabulary { config, grams, index }
    }

    pub fn config(&self) -> &NGramConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn grams(&self) -> &[Vec<String>] {
        &self.grams
    }

    pub fn column(&self, gram: &[&str]) -> Option<usize> {
        let key: Vec<String> = gram.iter().map(|s| s.to_string()).collect();
        self.index.get(&key).copied()
    }

    /// Human-readable column names: `A` for unigrams, `(A, B)` otherwise.
    pub fn feature_names(&self) -> Vec<String> {
        self.grams
            .iter()
            .map(|g| {
                if g.len() == 1 {
                    g[0].clone()
                } else {
                    format!("({})", g.join(", "))
                }
            })
            .collect()
    }

    pub fn encode(&self, trace: &Trace) -> NGramVector {
        let mut counts = BTreeMap::new();
        let mut key: Vec<String> = Vec::with_capacity(self.config.n);
        for w in extended(trace, self.config.pad_to).windows(self.config.n) {
            key.clear();
            key.extend(w.iter().map(|s| s.to_string()));
            if let Some(&col) = self.index.get(&key) {
                let c = counts.entry(col).or_insert(0);
                *c = if self.config.binary { 1 } else { *c + 1 };
            }
        }
        NGramVector {
            counts,
            dim: self.len(),
        }
    }

    pub fn encode_traces<'a>(&self, traces: impl IntoIterator<Item = &'a Trace>) -> FeatureMatrix {
        let rows = traces.into_iter().map(|t| {
            self.encode(t)
                .counts
                .into_iter()
                .map(|(j, c)| (j, f64::from(c)))
                .collect::<Vec<_>>()
        });
        FeatureMatrix::from_sparse_rows(self.len(), rows).expect("columns come from this vocabulary")
    }

    pub fn encode_log(&self, log: &LabeledLog) -> FeatureMatrix {
        self.encode_traces(log.traces.iter().map(|t| &t.trace))
    }

    /// One line per column: `index<TAB>token<TAB>token...`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, g) in self.grams.iter().enumerate() {
            writeln!(w, "{i}\t{}", g.join("\t"))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, config: NGramConfig) -> Result<Self> {
        let mut grams = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let bad = |m: &str| Error::Row {
                line: n as u64 + 1,
                message: m.to_owned(),
            };
            let id: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("missing column index"))?;
            if id != grams.len() {
                return Err(bad("column indices must be contiguous"));
            }
            let g: Vec<String> = parts.map(str::to_owned).collect();
            if g.len() != config.n {
                return Err(bad("gram length does not match n"));
            }
            grams.push(g);
        }
        Ok(Self::from_grams(config, grams))
    }
}
