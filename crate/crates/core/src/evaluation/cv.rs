use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auroc, Scorer, Trainer};
use crate::error::{Error, Result};
use crate::eventlog::Label;
use crate::matrix::FeatureMatrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            repeats: 50,
            folds: 5,
            seed: 0,
        }
    }
}

/// Assign each sample a fold id so that every fold receives each class in
/// near-equal numbers (per-class fold sizes differ by at most one).
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for class in Label::BOTH {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < folds {
            return Err(Error::Precondition(format!(
                "cannot stratify: class {class} has {} sample(s) for {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (p, i) in idx.iter().enumerate() {
            assignment[*i] = (p + offset) % folds;
        }
        // continue the round-robin where this class stopped to balance fold sizes
        offset = (offset + idx.len()) % folds;
    }
    Ok(assignment)
}

/// Run the protocol with a caller-supplied fit-and-score step.
///
/// `fit_score(train_idx, test_idx)` must return one score per test index.
/// Returns the AUROC of every (repeat, fold) in repeat-major order.
pub fn cross_validate_with<F>(labels: &[Label], cfg: &CvConfig, fit_score: F) -> Result<Vec<f64>>
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<f64>> + Sync,
{
    if cfg.repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let mut tasks = Vec::with_capacity(cfg.repeats * cfg.folds);
    for r in 0..cfg.repeats {
        let folds = stratified_folds(labels, cfg.folds, seed::derive_index(cfg.seed, r as u64))?;
        for k in 0..cfg.folds {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| folds[i] == k);
            tasks.push((train, test));
        }
    }
    tasks
        .par_iter()
        .map(|(train, test)| {
            let scores = fit_score(train, test)?;
            let y: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
            auroc(&scores, &y)
        })
        .collect()
}

pub fn cross_validate<T>(trainer: &T, x: &FeatureMatrix, y: &[Label], cfg: &CvConfig) -> Result<Vec<f64>>
where
    T: Trainer + Sync,
{
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: x.n_rows(),
        });
    }
    cross_validate_with(y, cfg, |train, test| {
        let xt = x.select_rows(train);
        let yt: Vec<Label> = train.iter().map(|&i| y[i]).collect();
        let model = trainer.fit(&xt, &yt)?;
        model.score_matrix(&x.select_rows(test))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseRow;

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<Label> = (0..23).map(|i| Label::from_bool(i % 3 == 0)).collect();
        let f = stratified_folds(&labels, 5, 4).unwrap();
        for class in Label::BOTH {
            let total = labels.iter().filter(|l| **l == class).count() as f64;
            for k in 0..5 {
                let c = (0..23).filter(|&i| f[i] == k && labels[i] == class).count() as f64;
                assert!((c - total / 5.0).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn too_small_class_errors() {
        let labels = [Label::Positive, Label::Negative, Label::Negative];
        assert!(matches!(
            stratified_folds(&labels, 2, 0),
            Err(Error::Precondition(_))
        ));
    }

    /// Scores each test sample by its first feature.
    struct Identity;
    struct IdentityModel;
    impl Scorer for IdentityModel {
        fn n_features(&self) -> usize {
            1
        }
        fn score_row(&self, row: SparseRow<'_>) -> f64 {
            row.get(0)
        }
    }
    impl Trainer for Identity {
        type Model = IdentityModel;
        fn fit(&self, _x: &FeatureMatrix, _y: &[Label]) -> Result<IdentityModel> {
            Ok(IdentityModel)
        }
    }

    #[test]
    fn four_sample_two_fold_hand_case() {
        // each fold gets one positive and one negative; scores 0.9/0.1 and 0.2/0.3
        let x = FeatureMatrix::from_dense(&[vec![0.9], vec![0.2], vec![0.1], vec![0.3]]).unwrap();
        let y = [Label::Positive, Label::Positive, Label::Negative, Label::Negative];
        let cfg = CvConfig {
            repeats: 1,
            folds: 2,
            seed: 5,
        };
        let scores = cross_validate(&Identity, &x, &y, &cfg).unwrap();
        assert_eq!(scores.len(), 2);
        // exhaustively: the fold holding positive 0.9 scores 1; the other
        // fold holds positive 0.2 against negative 0.1 or 0.3
        let folds = stratified_folds(&y, 2, seed::derive_index(5, 0)).unwrap();
        let mut expected = Vec::new();
        for k in 0..2 {
            let idx: Vec<usize> = (0..4).filter(|&i| folds[i] == k).collect();
            let p = idx.iter().find(|&&i| y[i].is_positive()).unwrap();
            let n = idx.iter().find(|&&i| !y[i].is_positive()).unwrap();
            let (sp, sn) = (x.get(*p, 0), x.get(*n, 0));
            expected.push(if sp > sn { 1.0 } else { 0.0 });
        }
        assert_eq!(scores, expected);
        let mean = scores.iter().sum::<f64>() / 2.0;
        assert!(mean == 0.5 || mean == 1.0);
    }

    #[test]
    fn reproducible_and_counted() {
        let x =
            FeatureMatrix::from_dense(&(0..30).map(|i| vec![f64::from(i % 7)]).collect::<Vec<_>>()).unwrap();
        let y: Vec<Label> = (0..30).map(|i| Label::from_bool(i % 2 == 0)).collect();
        let cfg = CvConfig {
            repeats: 3,
            folds: 5,
            seed: 9,
        };
        let a = cross_validate(&Identity, &x, &y, &cfg).unwrap();
        assert_eq!(a.len(), 15);
        assert_eq!(a, cross_validate(&Identity, &x, &y, &cfg).unwrap());
    }
}
