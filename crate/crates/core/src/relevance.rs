//! Global feature-relevance reports shared by all models.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceMethod {
    LassoCoefficient,
    Mdi,
    PermutationImportance,
    Attention,
}

impl RelevanceMethod {
    /// Whether scores carry a meaningful sign.
    pub fn is_signed(self) -> bool {
        matches!(self, RelevanceMethod::LassoCoefficient)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelevanceMethod::LassoCoefficient => "lasso_coefficient",
            RelevanceMethod::Mdi => "mdi",
            RelevanceMethod::PermutationImportance => "permutation_importance",
            RelevanceMethod::Attention => "attention",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    SumToOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_permutation_repeats: Option<usize>,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub method: RelevanceMethod,
    pub scores: Vec<FeatureScore>,
    pub metadata: RelevanceMetadata,
}

impl RelevanceReport {
    pub fn new(method: RelevanceMethod, scores: Vec<FeatureScore>, normalization: Normalization) -> Self {
        RelevanceReport {
            method,
            scores,
            metadata: RelevanceMetadata {
                n_permutation_repeats: None,
                normalization,
            },
        }
    }

    pub fn from_pairs(
        method: RelevanceMethod,
        names: &[String],
        values: &[f64],
        normalization: Normalization,
    ) -> Self {
        let scores = names
            .iter()
            .zip(values)
            .map(|(n, s)| FeatureScore {
                name: n.clone(),
                score: *s,
            })
            .collect();
        Self::new(method, scores, normalization)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.scores.iter().find(|s| s.name == name).map(|s| s.score)
    }

    pub fn total(&self) -> f64 {
        self.scores.iter().map(|s| s.score).sum()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores ordered by descending magnitude, ties by name.
    pub fn ranked(&self) -> Vec<&FeatureScore> {
        let mut v: Vec<&FeatureScore> = self.scores.iter().collect();
        v.sort_by(|a, b| {
            b.score
                .abs()
                .total_cmp(&a.score.abs())
                .then_with(|| a.name.cmp(&b.name))
        });
        v
    }

    /// Name with the highest (signed) score.
    pub fn argmax(&self) -> Option<&str> {
        self.scores
            .iter()
            .max_by(|a, b| a.score.total_cmp(&b.score).then_with(|| b.name.cmp(&a.name)))
            .map(|s| s.name.as_str())
    }

    /// Tab-separated `name, score, method` table sorted by magnitude.
    pub fn write_table<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "feature\tscore\tmethod")?;
        for s in self.ranked() {
            writeln!(w, "{}\t{:.6}\t{}", s.name, s.score, self.method.as_str())?;
        }
        w.flush()?;
        Ok(())
    }
}
