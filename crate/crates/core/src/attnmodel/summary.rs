use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{AttentionModel, AttentionTensor};
use crate::encoding::{TokenDictionary, TokenSequence};
use crate::error::{Error, Result};
use crate::relevance::{FeatureScore, Normalization, RelevanceMethod, RelevanceReport};

/// Attention mass per token name: for each trace, average the weights over
/// heads and real query positions, attribute each real key position's mass
/// to its token, sum over traces and normalise to one.
pub fn summarize_tensors(items: &[(AttentionTensor, Vec<String>)]) -> Result<RelevanceReport> {
    if items.is_empty() {
        return Err(Error::Precondition(
            "attention summary needs at least one trace".into(),
        ));
    }
    let mut mass: BTreeMap<&str, f64> = BTreeMap::new();
    for (t, tokens) in items {
        if tokens.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: t.len(),
                actual: tokens.len(),
            });
        }
        let queries: Vec<usize> = (0..t.len()).filter(|&i| t.mask[i]).collect();
        let denom = (t.n_heads() * queries.len()) as f64;
        for j in (0..t.len()).filter(|&j| t.mask[j]) {
            let mut m = 0.0;
            for head in &t.scores {
                for &i in &queries {
                    m += head[i][j];
                }
            }
            *mass.entry(tokens[j].as_str()).or_default() += m / denom;
        }
    }
    let total: f64 = mass.values().sum();
    let scores = mass
        .into_iter()
        .map(|(name, m)| FeatureScore {
            name: name.to_owned(),
            score: m / total,
        })
        .collect();
    Ok(RelevanceReport::new(
        RelevanceMethod::Attention,
        scores,
        Normalization::SumToOne,
    ))
}

pub fn attention_summary(
    model: &AttentionModel,
    seqs: &[TokenSequence],
    dict: &TokenDictionary,
) -> Result<RelevanceReport> {
    let items: Vec<(AttentionTensor, Vec<String>)> = seqs
        .par_iter()
        .map(|s| Ok((model.forward(s)?.1, s.token_names(dict))))
        .collect::<Result<_>>()?;
    summarize_tensors(&items)
}
