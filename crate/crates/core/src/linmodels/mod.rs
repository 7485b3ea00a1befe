//! Interpretable classifiers on n-gram vectors: L1-regularised logistic
//! regression, CART decision trees, and their relevance measures.

mod importance;
mod logistic;
mod tree;

pub use importance::{relevance_lasso, relevance_mdi, relevance_permutation};
pub use logistic::{
    fit_lr, lr_objective, select_c, smooth_loss_grad, train_lr, LinearModel, LogisticConfig, LrFit,
};
pub use tree::{gini, train_dt, Split, TreeConfig, TreeModel, TreeNode};

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned on-disk form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument<M> {
    pub format_version: u32,
    pub kind: String,
    pub feature_names: Vec<String>,
    pub model: M,
}

pub fn save_model<M: Serialize>(
    path: impl AsRef<Path>,
    kind: &str,
    feature_names: &[String],
    model: &M,
) -> Result<()> {
    let path = path.as_ref();
    let doc = ModelDocument {
        format_version: MODEL_FORMAT_VERSION,
        kind: kind.to_owned(),
        feature_names: feature_names.to_vec(),
        model,
    };
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), &doc)?;
    Ok(())
}

pub fn load_model<M: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<ModelDocument<M>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let doc: ModelDocument<M> = serde_json::from_reader(std::io::BufReader::new(f))?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported model format version {}",
            doc.format_version
        )));
    }
    if doc.kind != kind {
        return Err(Error::Config(format!(
            "expected a {kind} model, found {}",
            doc.kind
        )));
    }
    Ok(doc)
}
