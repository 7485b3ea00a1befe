use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Scorer, Trainer};
use crate::eventlog::Label;
use crate::matrix::{FeatureMatrix, SparseRow};

/// Improvements within this tolerance are treated as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Samples with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// `[negative, positive]` training samples reaching this node.
    pub counts: [usize; 2],
    pub impurity: f64,
    pub n_samples: usize,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn positive_fraction(&self) -> f64 {
        self.counts[1] as f64 / self.n_samples as f64
    }
}

/// Nodes are stored in pre-order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

fn class_index(l: Label) -> usize {
    usize::from(l.is_positive())
}

impl TreeModel {
    pub fn leaf_index(&self, row: SparseRow<'_>) -> usize {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if row.get(s.feature) <= s.threshold {
                s.left
            } else {
                s.right
            };
        }
        i
    }

    pub fn predict_proba_row(&self, row: SparseRow<'_>) -> f64 {
        self.nodes[self.leaf_index(row)].positive_fraction()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Unnormalised weighted impurity decrease per feature.
    pub fn impurity_decrease(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        let total = self.nodes[0].n_samples as f64;
        for node in &self.nodes {
            if let Some(s) = node.split {
                let l = &self.nodes[s.left];
                let r = &self.nodes[s.right];
                out[s.feature] += (node.n_samples as f64 * node.impurity
                    - l.n_samples as f64 * l.impurity
                    - r.n_samples as f64 * r.impurity)
                    / total;
            }
        }
        out
    }
}

impl Scorer for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn score_row(&self, row: SparseRow<'_>) -> f64 {
        self.predict_proba_row(row)
    }
}

impl Trainer for TreeConfig {
    type Model = TreeModel;

    fn fit(&self, x: &FeatureMatrix, y: &[Label]) -> Result<TreeModel> {
        train_dt(x, y, self)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [Label],
    cfg: &'a TreeConfig,
    /// Per-feature `(value, class)` buckets, reused across nodes.
    buckets: Vec<Vec<(f64, usize)>>,
}

impl Builder<'_> {
    fn best_split(&mut self, samples: &[usize], counts: [usize; 2], impurity: f64) -> Option<Candidate> {
        let mut touched = Vec::new();
        for &i in samples {
            let c = class_index(self.y[i]);
            for (j, v) in self.x.row(i).iter() {
                if self.buckets[j].is_empty() {
                    touched.push(j);
                }
                self.buckets[j].push((v, c));
            }
        }
        touched.sort_unstable();

        let n = samples.len();
        let nf = n as f64;
        let min_leaf = self.cfg.min_samples_leaf;
        let mut best: Option<Candidate> = None;
        let mut groups: Vec<(f64, [usize; 2])> = Vec::new();
        for &f in &touched {
            let mut bucket = std::mem::take(&mut self.buckets[f]);
            bucket.sort_by(|a, b| a.0.total_cmp(&b.0));
            groups.clear();
            let mut zero = counts;
            for &(_, c) in &bucket {
                zero[c] -= 1;
            }
            let mut zero_pending = zero[0] + zero[1] > 0;
            for &(v, c) in &bucket {
                if zero_pending && v > 0.0 {
                    groups.push((0.0, zero));
                    zero_pending = false;
                }
                match groups.last_mut() {
                    Some((gv, gc)) if *gv == v => gc[c] += 1,
                    _ => {
                        let mut gc = [0, 0];
                        gc[c] += 1;
                        groups.push((v, gc));
                    }
                }
            }
            if zero_pending {
                groups.push((0.0, zero));
            }
            bucket.clear();
            self.buckets[f] = bucket;

            let mut left = [0usize; 2];
            for k in 0..groups.len().saturating_sub(1) {
                left[0] += groups[k].1[0];
                left[1] += groups[k].1[1];
                let nl = left[0] + left[1];
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let gain = impurity - (nl as f64 / nf) * gini(left) - (nr as f64 / nf) * gini(right);
                if best.is_none_or(|b| gain > b.gain + TIE_EPS) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: 0.5 * (groups[k].0 + groups[k + 1].0),
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Fit a CART classification tree with Gini impurity.
///
/// Splits with zero impurity decrease are accepted as long as the node is
/// impure, so that interactions such as XOR can be learned.
pub fn train_dt(x: &FeatureMatrix, y: &[Label], cfg: &TreeConfig) -> Result<TreeModel> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: x.n_rows(),
        });
    }
    if cfg.min_samples_leaf == 0 || cfg.min_samples_split < 2 {
        return Err(Error::InvalidParameter(
            "min_samples_leaf must be >= 1 and min_samples_split >= 2".into(),
        ));
    }
    if y.len() < cfg.min_samples_split {
        return Err(Error::Precondition(format!(
            "need at least {} samples to fit a tree, got {}",
            cfg.min_samples_split,
            y.len()
        )));
    }
    if x.rows().any(|r| r.values.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("feature matrix".into()));
    }

    let mut b = Builder {
        x,
        y,
        cfg,
        buckets: vec![Vec::new(); x.n_cols()],
    };
    let mut nodes: Vec<TreeNode> = Vec::new();
    // (samples, depth, parent and whether this is its left child)
    type Pending = (Vec<usize>, usize, Option<(usize, bool)>);
    let mut stack: Vec<Pending> = vec![((0..y.len()).collect(), 0, None)];
    while let Some((samples, depth, parent)) = stack.pop() {
        let mut counts = [0usize; 2];
        for &i in &samples {
            counts[class_index(y[i])] += 1;
        }
        let impurity = gini(counts);
        let id = nodes.len();
        nodes.push(TreeNode {
            split: None,
            counts,
            impurity,
            n_samples: samples.len(),
            depth,
        });
        if let Some((p, is_left)) = parent {
            let s = nodes[p].split.as_mut().expect("parent has split");
            if is_left {
                s.left = id;
            } else {
                s.right = id;
            }
        }

        let can_split = impurity > 0.0
            && samples.len() >= cfg.min_samples_split
            && cfg.max_depth.is_none_or(|d| depth < d);
        if !can_split {
            continue;
        }
        let Some(c) = b.best_split(&samples, counts, impurity) else {
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&i| x.get(i, c.feature) <= c.threshold);
        nodes[id].split = Some(Split {
            feature: c.feature,
            threshold: c.threshold,
            left: usize::MAX,
            right: usize::MAX,
        });
        // Right is pushed first so the left subtree is numbered first.
        stack.push((r, depth + 1, Some((id, false))));
        stack.push((l, depth + 1, Some((id, true))));
    }
    Ok(TreeModel {
        nodes: prune_uninformative(nodes),
        n_features: x.n_cols(),
    })
}

fn same_proportions(a: [usize; 2], b: [usize; 2]) -> bool {
    a[1] * (b[0] + b[1]) == b[1] * (a[0] + a[1])
}

/// Collapse subtrees whose leaves all share the subtree root's class
/// proportions. Such subtrees arise from zero-gain splits that never pay off;
/// removing them leaves every prediction unchanged.
fn prune_uninformative(nodes: Vec<TreeNode>) -> Vec<TreeNode> {
    let mut flat = vec![true; nodes.len()];
    // Children always follow their parent in pre-order.
    for i in (0..nodes.len()).rev() {
        if let Some(s) = nodes[i].split {
            flat[i] = flat[s.left]
                && flat[s.right]
                && same_proportions(nodes[s.left].counts, nodes[i].counts)
                && same_proportions(nodes[s.right].counts, nodes[i].counts);
        }
    }
    if !flat.iter().zip(&nodes).any(|(f, n)| *f && !n.is_leaf()) {
        return nodes;
    }
    let mut out: Vec<TreeNode> = Vec::with_capacity(nodes.len());
    let mut stack = vec![(0usize, None::<(usize, bool)>)];
    while let Some((old, parent)) = stack.pop() {
        let id = out.len();
        let mut node = nodes[old].clone();
        let split = node.split.take().filter(|_| !flat[old]);
        if let Some(s) = split {
            node.split = Some(Split {
                left: usize::MAX,
                right: usize::MAX,
                ..s
            });
            stack.push((s.right, Some((id, false))));
            stack.push((s.left, Some((id, true))));
        }
        out.push(node);
        if let Some((p, is_left)) = parent {
            let s = out[p].split.as_mut().expect("parent has split");
            if is_left {
                s.left = id;
            } else {
                s.right = id;
            }
        }
    }
    out
}
