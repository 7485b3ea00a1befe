//! Trace encodings: n-gram count vectors for the classic models and
//! fixed-length token sequences for the attention model.
//!
//! Both vocabularies are fitted on the training split only.

mod dictionary;
mod ngram;

pub use dictionary::{
    max_len_for, read_sequences, write_sequences, TokenDictionary, TokenSequence, END, END_ID, PAD, PAD_ID,
    RESERVED, START, START_ID, UNK, UNK_ID,
};
pub use ngram::{NGramConfig, NGramVector, NGramVocabulary};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four trace representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Encoding {
    #[serde(rename = "1gram")]
    Unigram,
    #[serde(rename = "2gram")]
    Bigram,
    #[serde(rename = "3gram")]
    Trigram,
    #[serde(rename = "tokens")]
    Tokens,
}

impl Encoding {
    pub const ALL: [Encoding; 4] = [
        Encoding::Unigram,
        Encoding::Bigram,
        Encoding::Trigram,
        Encoding::Tokens,
    ];

    pub fn ngram_order(self) -> Option<usize> {
        match self {
            Encoding::Unigram => Some(1),
            Encoding::Bigram => Some(2),
            Encoding::Trigram => Some(3),
            Encoding::Tokens => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::Unigram => "1gram",
            Encoding::Bigram => "2gram",
            Encoding::Trigram => "3gram",
            Encoding::Tokens => "tokens",
        }
    }

    /// Row label used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Encoding::Unigram => "1-gram",
            Encoding::Bigram => "2-gram",
            Encoding::Trigram => "3-gram",
            Encoding::Tokens => "integer",
        }
    }
}

impl std::str::FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Encoding::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown encoding '{s}'")))
    }
}

impl std::fmt::Display for Encoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
