use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{LinearModel, TreeModel};
use crate::error::{Error, Result};
use crate::evaluation::{auroc, Scorer};
use crate::eventlog::Label;
use crate::matrix::FeatureMatrix;
use crate::relevance::{Normalization, RelevanceMethod, RelevanceReport};
use crate::seed;

fn check_names(names: &[String], n_features: usize) -> Result<()> {
    if names.len() != n_features {
        return Err(Error::DimensionMismatch {
            expected: n_features,
            actual: names.len(),
        });
    }
    Ok(())
}

/// Signed coefficients of a sparse logistic model.
pub fn relevance_lasso(model: &LinearModel, names: &[String]) -> Result<RelevanceReport> {
    check_names(names, model.weights.len())?;
    Ok(RelevanceReport::from_pairs(
        RelevanceMethod::LassoCoefficient,
        names,
        &model.weights,
        Normalization::None,
    ))
}

/// Mean decrease in impurity, normalised to sum to one. A tree without
/// informative splits yields an empty report.
pub fn relevance_mdi(model: &TreeModel, names: &[String]) -> Result<RelevanceReport> {
    check_names(names, model.n_features)?;
    let mut dec = model.impurity_decrease();
    let total: f64 = dec.iter().sum();
    if total <= 0.0 {
        return Ok(RelevanceReport::new(
            RelevanceMethod::Mdi,
            Vec::new(),
            Normalization::SumToOne,
        ));
    }
    dec.iter_mut().for_each(|v| *v /= total);
    Ok(RelevanceReport::from_pairs(
        RelevanceMethod::Mdi,
        names,
        &dec,
        Normalization::SumToOne,
    ))
}

/// Mean drop in AUROC when one column is shuffled, over `repeats` shuffles.
/// Each feature draws from its own seeded stream, so results do not depend
/// on evaluation order.
pub fn relevance_permutation<M>(
    model: &M,
    x: &FeatureMatrix,
    y: &[Label],
    names: &[String],
    repeats: usize,
    seed: u64,
) -> Result<RelevanceReport>
where
    M: Scorer + Sync,
{
    check_names(names, model.n_features())?;
    if repeats == 0 {
        return Err(Error::InvalidParameter("permutation repeats must be >= 1".into()));
    }
    let baseline = auroc(&model.score_matrix(x)?, y)?;
    let columns = x.columns();
    let scores = (0..x.n_cols())
        .into_par_iter()
        .map(|f| -> Result<f64> {
            let col = &columns[f];
            let constant =
                col.is_empty() || (col.len() == x.n_rows() && col.iter().all(|(_, v)| *v == col[0].1));
            if constant {
                return Ok(0.0);
            }
            let mut rng = seed::rng(seed::derive_index(seed, f as u64));
            let mut perm: Vec<usize> = (0..x.n_rows()).collect();
            let mut drop = 0.0;
            for _ in 0..repeats {
                perm.shuffle(&mut rng);
                let xp = x.with_column_permuted(f, &perm);
                drop += baseline - auroc(&model.score_matrix(&xp)?, y)?;
            }
            Ok(drop / repeats as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut report = RelevanceReport::from_pairs(
        RelevanceMethod::PermutationImportance,
        names,
        &scores,
        Normalization::None,
    );
    report.metadata.n_permutation_repeats = Some(repeats);
    Ok(report)
}
