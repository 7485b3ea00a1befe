use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{cross_validate, mean, CvConfig, Scorer, Trainer};
use crate::eventlog::Label;
use crate::matrix::{FeatureMatrix, SparseRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// Inverse regularisation strength.
    pub c: f64,
    pub max_iter: usize,
    /// Stop once the objective decreases by less than this.
    pub tol: f64,
    /// Scale columns to unit standard deviation before fitting. Weights are
    /// reported on the original scale.
    pub standardize: bool,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            c: 1.0,
            max_iter: 5000,
            tol: 1e-8,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrFit {
    pub model: LinearModel,
    /// Objective after each accepted step, starting with the initial point.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LinearModel {
    pub fn zeros(n_features: usize, c: f64) -> Self {
        LinearModel {
            weights: vec![0.0; n_features],
            bias: 0.0,
            c,
        }
    }

    pub fn decision(&self, row: SparseRow<'_>) -> f64 {
        row.dot(&self.weights) + self.bias
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: x.len(),
            });
        }
        let z: f64 = x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias;
        Ok(sigmoid(z))
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

impl Scorer for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn score_row(&self, row: SparseRow<'_>) -> f64 {
        sigmoid(self.decision(row))
    }
}

/// Mean logistic loss and its gradient `(loss, grad_w, grad_b)`.
pub fn smooth_loss_grad(x: &FeatureMatrix, y: &[f64], w: &[f64], b: f64) -> (f64, Vec<f64>, f64) {
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    let mut resid = Vec::with_capacity(x.n_rows());
    for (r, &yi) in x.rows().zip(y) {
        let z = r.dot(w) + b;
        loss += softplus(z) - yi * z;
        resid.push((sigmoid(z) - yi) / n);
    }
    let gb = resid.iter().sum();
    (loss / n, x.transpose_dot(&resid), gb)
}

fn smooth_loss(x: &FeatureMatrix, y: &[f64], w: &[f64], b: f64) -> f64 {
    let n = x.n_rows() as f64;
    x.rows()
        .zip(y)
        .map(|(r, &yi)| {
            let z = r.dot(w) + b;
            softplus(z) - yi * z
        })
        .sum::<f64>()
        / n
}

/// Mean logistic loss plus `‖w‖₁ / (C·N)`; the bias is not penalised.
pub fn lr_objective(x: &FeatureMatrix, y: &[Label], w: &[f64], b: f64, c: f64) -> f64 {
    let yf: Vec<f64> = y.iter().map(|l| l.as_f64()).collect();
    let lambda = 1.0 / (c * x.n_rows() as f64);
    smooth_loss(x, &yf, w, b) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Proximal gradient descent with backtracking line search.
pub fn fit_lr(x: &FeatureMatrix, y: &[Label], cfg: &LogisticConfig) -> Result<LrFit> {
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "C must be positive, got {}",
            cfg.c
        )));
    }
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: x.n_rows(),
        });
    }
    for class in Label::BOTH {
        if !y.contains(&class) {
            return Err(Error::Precondition(format!(
                "logistic regression needs samples of class {class}"
            )));
        }
    }
    if x.rows().any(|r| r.values.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("feature matrix".into()));
    }

    let scale: Option<Vec<f64>> = cfg.standardize.then(|| column_inv_std(x));
    let scaled;
    let xs = match &scale {
        Some(s) => {
            scaled = x.scale_columns(s);
            &scaled
        }
        None => x,
    };

    let yf: Vec<f64> = y.iter().map(|l| l.as_f64()).collect();
    let lambda = 1.0 / (cfg.c * x.n_rows() as f64);
    let l1 = |w: &[f64]| lambda * w.iter().map(|v| v.abs()).sum::<f64>();

    let d = x.n_cols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut objective = smooth_loss(xs, &yf, &w, b);
    let mut history = vec![objective];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let (f, gw, gb) = smooth_loss_grad(xs, &yf, &w, b);
        let (w_new, b_new, f_new) = loop {
            let w_try: Vec<f64> = w
                .iter()
                .zip(&gw)
                .map(|(wi, gi)| soft_threshold(wi - step * gi, step * lambda))
                .collect();
            let b_try = b - step * gb;
            let f_try = smooth_loss(xs, &yf, &w_try, b_try);
            let mut lin = (b_try - b) * gb;
            let mut sq = (b_try - b) * (b_try - b);
            for j in 0..d {
                let dj = w_try[j] - w[j];
                lin += dj * gw[j];
                sq += dj * dj;
            }
            if f_try <= f + lin + sq / (2.0 * step) + 1e-15 * f.abs() {
                break (w_try, b_try, f_try);
            }
            step *= 0.5;
            if step < 1e-30 {
                return Err(Error::Diverged("line search step underflow".into()));
            }
        };
        let new_objective = f_new + l1(&w_new);
        if !new_objective.is_finite() {
            return Err(Error::Diverged(format!("objective became {new_objective}")));
        }
        let decrease = objective - new_objective;
        debug_assert!(decrease >= -1e-12, "objective increased by {}", -decrease);
        w = w_new;
        b = b_new;
        objective = new_objective;
        history.push(objective);
        if decrease < cfg.tol {
            converged = true;
            break;
        }
        step *= 2.0;
    }

    if let Some(s) = &scale {
        for (wj, sj) in w.iter_mut().zip(s) {
            *wj *= sj;
        }
    }
    Ok(LrFit {
        model: LinearModel {
            weights: w,
            bias: b,
            c: cfg.c,
        },
        objective_history: history,
        iterations,
        converged,
    })
}

fn column_inv_std(x: &FeatureMatrix) -> Vec<f64> {
    let n = x.n_rows() as f64;
    let mut sum = vec![0.0; x.n_cols()];
    let mut sq = vec![0.0; x.n_cols()];
    for r in x.rows() {
        for (j, v) in r.iter() {
            sum[j] += v;
            sq[j] += v * v;
        }
    }
    sum.iter()
        .zip(&sq)
        .map(|(s, q)| {
            let var = q / n - (s / n).powi(2);
            if var > 1e-24 {
                1.0 / var.sqrt()
            } else {
                1.0
            }
        })
        .collect()
}

pub fn train_lr(x: &FeatureMatrix, y: &[Label], cfg: &LogisticConfig) -> Result<LinearModel> {
    fit_lr(x, y, cfg).map(|f| f.model)
}

impl Trainer for LogisticConfig {
    type Model = LinearModel;

    fn fit(&self, x: &FeatureMatrix, y: &[Label]) -> Result<LinearModel> {
        train_lr(x, y, self)
    }
}

/// Pick the C with the best mean cross-validated AUROC (first wins on ties).
pub fn select_c(
    x: &FeatureMatrix,
    y: &[Label],
    base: &LogisticConfig,
    grid: &[f64],
    cv: &CvConfig,
) -> Result<(f64, Vec<f64>)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty C grid".into()));
    }
    let mut means = Vec::with_capacity(grid.len());
    for &c in grid {
        let scores = cross_validate(&LogisticConfig { c, ..*base }, x, y, cv)?;
        means.push(mean(&scores));
    }
    let best = means
        .iter()
        .enumerate()
        .fold(0, |bi, (i, m)| if *m > means[bi] { i } else { bi });
    Ok((grid[best], means))
}
