use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::eventlog::{LabeledLog, Trace};

pub const PAD: &str = "<pad>";
pub const START: &str = "<start>";
pub const END: &str = "<end>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: u32 = 0;
pub const START_ID: u32 = 1;
pub const END_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const RESERVED: [&str; 4] = [PAD, START, END, UNK];

/// Bijection between tokens and contiguous integer ids.
///
/// Ids 0..4 are the reserved tokens; activities follow in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenDictionary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl TokenDictionary {
    pub fn from_activities<'a>(activities: impl IntoIterator<Item = &'a str>) -> Self {
        let sorted: BTreeSet<&str> = activities.into_iter().filter(|a| !RESERVED.contains(a)).collect();
        let tokens: Vec<String> = RESERVED
            .iter()
            .copied()
            .chain(sorted)
            .map(str::to_owned)
            .collect();
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        TokenDictionary { tokens, ids }
    }

    pub fn build(train: &LabeledLog) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Precondition(
                "token dictionary needs a non-empty training log".into(),
            ));
        }
        Ok(Self::from_activities(
            train
                .traces
                .iter()
                .flat_map(|t| t.trace.activities.iter().map(String::as_str)),
        ))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    /// Id of `token`, falling back to `<unk>`.
    pub fn id(&self, token: &str) -> u32 {
        self.get(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, t) in self.tokens.iter().enumerate() {
            writeln!(w, "{i}\t{t}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (id, tok) = line.split_once('\t').ok_or_else(|| Error::Row {
                line: n as u64 + 1,
                message: "expected '<id>\\t<token>'".into(),
            })?;
            if id.parse::<usize>().ok() != Some(tokens.len()) {
                return Err(Error::Row {
                    line: n as u64 + 1,
                    message: format!("ids must be contiguous, found '{id}'"),
                });
            }
            tokens.push(tok.to_owned());
        }
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::Schema(
                "dictionary must start with the reserved tokens".into(),
            ));
        }
        Ok(Self::from_activities(tokens.iter().map(String::as_str)))
    }

    pub fn encode(&self, trace: &Trace, max_len: usize) -> Result<TokenSequence> {
        TokenSequence::encode(trace, self, max_len)
    }
}

/// Fixed-length id sequence: `<start>`, activity ids, `<end>`, then `<pad>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// true for real (non-pad) positions
    pub mask: Vec<bool>,
    pub truncated: bool,
}

impl TokenSequence {
    pub fn encode(trace: &Trace, dict: &TokenDictionary, max_len: usize) -> Result<Self> {
        if max_len < 3 {
            return Err(Error::InvalidParameter(format!(
                "max_len must be at least 3, got {max_len}"
            )));
        }
        let keep = trace.len().min(max_len - 2);
        let truncated = keep < trace.len();
        let mut ids = Vec::with_capacity(max_len);
        ids.push(START_ID);
        ids.extend(trace.activities[..keep].iter().map(|a| dict.id(a)));
        ids.push(END_ID);
        let real = ids.len();
        ids.resize(max_len, PAD_ID);
        let mask = (0..max_len).map(|i| i < real).collect();
        Ok(TokenSequence { ids, mask, truncated })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Activity names with pads and boundary tokens stripped.
    pub fn decode(&self, dict: &TokenDictionary) -> Vec<String> {
        self.ids
            .iter()
            .zip(&self.mask)
            .filter(|(id, m)| **m && **id != START_ID && **id != END_ID && **id != PAD_ID)
            .filter_map(|(id, _)| dict.token(*id).map(str::to_owned))
            .collect()
    }

    /// Token names for every position (pads included).
    pub fn token_names(&self, dict: &TokenDictionary) -> Vec<String> {
        self.ids
            .iter()
            .map(|id| dict.token(*id).unwrap_or(UNK).to_owned())
            .collect()
    }
}

/// Sequence length for a training log: longest trace plus the two boundary tokens.
pub fn max_len_for(train: &LabeledLog) -> usize {
    train.traces.iter().map(|t| t.trace.len()).max().unwrap_or(1) + 2
}

/// Write sequences as whitespace-separated ids under a `# shape rows cols` header.
pub fn write_sequences<W: Write>(seqs: &[TokenSequence], mut w: W) -> Result<()> {
    let cols = seqs.first().map_or(0, TokenSequence::len);
    writeln!(w, "# shape {} {}", seqs.len(), cols)?;
    for s in seqs {
        let line: Vec<String> = s.ids.iter().map(u32::to_string).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Read sequences written by [`write_sequences`]; the mask marks non-pad ids.
pub fn read_sequences<R: BufRead>(r: R) -> Result<Vec<TokenSequence>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let dims: Vec<usize> = header
        .strip_prefix("# shape ")
        .map(|s| s.split_whitespace().filter_map(|x| x.parse().ok()).collect())
        .unwrap_or_default();
    let [rows, cols] = dims[..] else {
        return Err(Error::Schema(format!("bad sequence header '{header}'")));
    };
    let mut out = Vec::with_capacity(rows);
    for (n, line) in lines.enumerate() {
        let line = line?;
        let ids: Vec<u32> = line
            .split_whitespace()
            .map(|x| x.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Row {
                line: n as u64 + 2,
                message: format!("{e}"),
            })?;
        if ids.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                actual: ids.len(),
            });
        }
        let mask = ids.iter().map(|&i| i != PAD_ID).collect();
        out.push(TokenSequence {
            ids,
            mask,
            truncated: false,
        });
    }
    if out.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            actual: out.len(),
        });
    }
    Ok(out)
}
