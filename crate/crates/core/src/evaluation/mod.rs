//! AUROC and the repeated stratified k-fold protocol.

mod auroc;
mod cv;

pub use auroc::auroc;
pub use cv::{cross_validate, cross_validate_with, stratified_folds, CvConfig};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eventlog::Label;
use crate::matrix::{FeatureMatrix, SparseRow};

/// A fitted binary classifier producing a real-valued positive-class score.
pub trait Scorer {
    fn n_features(&self) -> usize;

    fn score_row(&self, row: SparseRow<'_>) -> f64;

    fn score_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features() {
            return Err(crate::Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.n_cols(),
            });
        }
        Ok(x.rows().map(|r| self.score_row(r)).collect())
    }
}

/// A model-fitting procedure over feature matrices.
pub trait Trainer {
    type Model: Scorer;

    fn fit(&self, x: &FeatureMatrix, y: &[Label]) -> Result<Self::Model>;
}

/// One cell of the results grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub dataset: String,
    pub encoding: String,
    pub model: String,
    /// Mean of the cross-validation fold scores, or the train-set score for
    /// models evaluated without cross-validation.
    pub train_auroc: f64,
    /// Score of the model refit on the full training split, on the hold-out set.
    pub test_auroc: f64,
    #[serde(default)]
    pub fold_scores: Vec<f64>,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}
