//! Independent reference implementations used by integration and acceptance
//! tests. They favour obviousness over speed and share no code with the
//! library beyond plain data types.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use tracelens::attnmodel::{AttentionConfig, AttentionModel};
use tracelens::encoding::TokenSequence;
use tracelens::Label;

/// Probability that a random positive outscores a random negative, ties ½.
pub fn pairwise_auroc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, li) in labels.iter().enumerate() {
        if !li.is_positive() {
            continue;
        }
        for (j, lj) in labels.iter().enumerate() {
            if lj.is_positive() {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Random AUROC instance with both classes and deliberately coarse scores so
/// that ties are common.
pub fn random_auroc_instance(rng: &mut impl Rng) -> (Vec<f64>, Vec<Label>) {
    let n = rng.gen_range(2..=200);
    let levels = rng.gen_range(2..=20);
    loop {
        let labels: Vec<Label> = (0..n).map(|_| Label::from_bool(rng.gen_bool(0.4))).collect();
        if labels.iter().any(|l| l.is_positive()) && labels.iter().any(|l| !l.is_positive()) {
            let scores = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        f64::from(rng.gen_range(0..levels))
                    } else {
                        rng.gen::<f64>()
                    }
                })
                .collect();
            return (scores, labels);
        }
    }
}

// ---------------------------------------------------------------------------
// L1 logistic regression: dense objective and grid search.

pub fn dense_objective(x: &[Vec<f64>], y: &[Label], w: &[f64], b: f64, c: f64) -> f64 {
    let n = x.len() as f64;
    let mut loss = 0.0;
    for (row, l) in x.iter().zip(y) {
        let z: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let yi = l.as_f64();
        // log(1 + e^z) - y z, written both ways for stability
        loss += if z > 0.0 {
            z + (-z).exp().ln_1p() - yi * z
        } else {
            z.exp().ln_1p() - yi * z
        };
    }
    loss / n + w.iter().map(|v| v.abs()).sum::<f64>() / (c * n)
}

/// Minimise over the bias for fixed weights (smooth, convex, 1-D) by
/// bisection on the derivative.
fn best_bias(x: &[Vec<f64>], y: &[Label], w: &[f64]) -> f64 {
    let deriv = |b: f64| -> f64 {
        x.iter()
            .zip(y)
            .map(|(row, l)| {
                let z: f64 = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
                1.0 / (1.0 + (-z).exp()) - l.as_f64()
            })
            .sum()
    };
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Coarse-to-fine grid search over a 2-D weight space with the bias profiled
/// out. Returns `(w, b, objective)`.
pub fn grid_lr_oracle(x: &[Vec<f64>], y: &[Label], c: f64) -> ([f64; 2], f64, f64) {
    let mut centre = [0.0, 0.0];
    let mut half = 16.0;
    let steps = 40;
    let mut best = ([0.0, 0.0], 0.0, f64::INFINITY);
    while half > 1e-7 {
        let h = 2.0 * half / steps as f64;
        for i in 0..=steps {
            for j in 0..=steps {
                let w = [centre[0] - half + h * i as f64, centre[1] - half + h * j as f64];
                let b = best_bias(x, y, &w);
                let f = dense_objective(x, y, &w, b, c);
                if f < best.2 {
                    best = (w, b, f);
                }
            }
        }
        // Keep zero representable exactly: sparse optima sit on the axes.
        for w in [[best.0[0], 0.0], [0.0, best.0[1]], [0.0, 0.0]] {
            let b = best_bias(x, y, &w);
            let f = dense_objective(x, y, &w, b, c);
            if f < best.2 {
                best = (w, b, f);
            }
        }
        centre = best.0;
        half = 4.0 * h;
    }
    best
}

// ---------------------------------------------------------------------------
// CART: exhaustive split enumeration on dense data.

#[derive(Debug, Clone, PartialEq)]
pub struct OracleNode {
    pub split: Option<(usize, f64, usize, usize)>,
    pub counts: [usize; 2],
    pub n_samples: usize,
}

fn gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let a = c[0] as f64 / n;
    let b = c[1] as f64 / n;
    1.0 - a * a - b * b
}

fn counts_of(idx: &[usize], y: &[Label]) -> [usize; 2] {
    let pos = idx.iter().filter(|&&i| y[i].is_positive()).count();
    [idx.len() - pos, pos]
}

enum Tree {
    Leaf([usize; 2]),
    Node {
        feature: usize,
        threshold: f64,
        counts: [usize; 2],
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

impl Tree {
    fn counts(&self) -> [usize; 2] {
        match self {
            Tree::Leaf(c) | Tree::Node { counts: c, .. } => *c,
        }
    }
}

fn grow(
    x: &[Vec<f64>],
    y: &[Label],
    idx: Vec<usize>,
    depth: usize,
    max_depth: Option<usize>,
    min_split: usize,
    min_leaf: usize,
) -> Tree {
    let counts = counts_of(&idx, y);
    let imp = gini(counts);
    if imp == 0.0 || idx.len() < min_split || max_depth.is_some_and(|d| depth >= d) {
        return Tree::Leaf(counts);
    }
    let n = idx.len() as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for pair in vals.windows(2) {
            let t = (pair[0] + pair[1]) / 2.0;
            let l: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] <= t).collect();
            let r: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] > t).collect();
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let gain = imp
                - l.len() as f64 / n * gini(counts_of(&l, y))
                - r.len() as f64 / n * gini(counts_of(&r, y));
            let better = match best {
                None => true,
                Some((_, _, g)) => gain > g + 1e-12,
            };
            if better {
                best = Some((f, t, gain));
            }
        }
    }
    let Some((feature, threshold, _)) = best else {
        return Tree::Leaf(counts);
    };
    let l: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|&i| x[i][feature] <= threshold)
        .collect();
    let r: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|&i| x[i][feature] > threshold)
        .collect();
    let left = grow(x, y, l, depth + 1, max_depth, min_split, min_leaf);
    let right = grow(x, y, r, depth + 1, max_depth, min_split, min_leaf);
    Tree::Node {
        feature,
        threshold,
        counts,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// True when every leaf below has the same positive share as `c`.
fn uniform_below(t: &Tree, c: [usize; 2]) -> bool {
    match t {
        Tree::Leaf(lc) => lc[1] as u128 * (c[0] + c[1]) as u128 == c[1] as u128 * (lc[0] + lc[1]) as u128,
        Tree::Node {
            left, right, counts, ..
        } => uniform_below(&Tree::Leaf(*counts), c) && uniform_below(left, c) && uniform_below(right, c),
    }
}

fn prune(t: Tree) -> Tree {
    match t {
        Tree::Leaf(_) => t,
        Tree::Node {
            feature,
            threshold,
            counts,
            left,
            right,
        } => {
            let node = Tree::Node {
                feature,
                threshold,
                counts,
                left: Box::new(prune(*left)),
                right: Box::new(prune(*right)),
            };
            if uniform_below(&node, counts) {
                Tree::Leaf(counts)
            } else {
                node
            }
        }
    }
}

fn flatten(t: &Tree, out: &mut Vec<OracleNode>) -> usize {
    let id = out.len();
    let c = t.counts();
    out.push(OracleNode {
        split: None,
        counts: c,
        n_samples: c[0] + c[1],
    });
    if let Tree::Node {
        feature,
        threshold,
        left,
        right,
        ..
    } = t
    {
        let l = flatten(left, out);
        let r = flatten(right, out);
        out[id].split = Some((*feature, *threshold, l, r));
    }
    id
}

/// Pre-order node list of the greedy tree found by trying every
/// (feature, threshold) pair at every node.
pub fn exhaustive_tree(
    x: &[Vec<f64>],
    y: &[Label],
    max_depth: Option<usize>,
    min_split: usize,
    min_leaf: usize,
) -> Vec<OracleNode> {
    let t = prune(grow(
        x,
        y,
        (0..y.len()).collect(),
        0,
        max_depth,
        min_split,
        min_leaf,
    ));
    let mut out = Vec::new();
    flatten(&t, &mut out);
    out
}

/// Random small dense fixture with integer-valued features (many ties).
pub fn random_tree_fixture(rng: &mut impl Rng, max_n: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
    let n = rng.gen_range(2..=max_n);
    let d = rng.gen_range(1..=4);
    let levels = rng.gen_range(2..=4);
    let x = (0..n)
        .map(|_| (0..d).map(|_| f64::from(rng.gen_range(0..levels))).collect())
        .collect();
    let y = (0..n).map(|_| Label::from_bool(rng.gen_bool(0.5))).collect();
    (x, y)
}

// ---------------------------------------------------------------------------
// Attention classifier: naive evaluation-mode forward pass.

fn matvec(x: &[f64], w: &[f64], b: &[f64], dout: usize) -> Vec<f64> {
    (0..dout)
        .map(|j| {
            b[j] + x
                .iter()
                .enumerate()
                .map(|(i, xi)| xi * w[i * dout + j])
                .sum::<f64>()
        })
        .collect()
}

/// Step-by-step probability for one sequence, written without any of the
/// library's buffers or loop fusion.
pub fn naive_attention_forward(
    cfg: &tracelens::attnmodel::AttentionConfig,
    p: &tracelens::attnmodel::Params,
    ids: &[u32],
    mask: &[bool],
) -> f64 {
    let d = cfg.d_model;
    let heads = cfg.n_heads;
    let dh = d / heads;
    let l = ids.len();
    let x: Vec<Vec<f64>> = (0..l)
        .map(|pos| {
            (0..d)
                .map(|c| {
                    let i = (c / 2) as f64;
                    let angle = pos as f64 / 10000f64.powf(2.0 * i / d as f64);
                    let pe = if c % 2 == 0 { angle.sin() } else { angle.cos() };
                    p.embedding[ids[pos] as usize * d + c] + pe
                })
                .collect()
        })
        .collect();
    let q: Vec<Vec<f64>> = x.iter().map(|r| matvec(r, &p.w_q, &p.b_q, d)).collect();
    let k: Vec<Vec<f64>> = x.iter().map(|r| matvec(r, &p.w_k, &p.b_k, d)).collect();
    let v: Vec<Vec<f64>> = x.iter().map(|r| matvec(r, &p.w_v, &p.b_v, d)).collect();
    let mut ctx = vec![vec![0.0; d]; l];
    for h in 0..heads {
        for i in 0..l {
            let logits: Vec<Option<f64>> = (0..l)
                .map(|j| {
                    mask[j].then(|| {
                        (0..dh).map(|c| q[i][h * dh + c] * k[j][h * dh + c]).sum::<f64>() / (dh as f64).sqrt()
                    })
                })
                .collect();
            let z: f64 = logits.iter().flatten().map(|s| s.exp()).sum();
            for j in 0..l {
                if let Some(s) = logits[j] {
                    let a = s.exp() / z;
                    for c in 0..dh {
                        ctx[i][h * dh + c] += a * v[j][h * dh + c];
                    }
                }
            }
        }
    }
    let out: Vec<Vec<f64>> = ctx.iter().map(|r| matvec(r, &p.w_o, &p.b_o, d)).collect();
    let y: Vec<Vec<f64>> = if cfg.residual_norm {
        (0..l)
            .map(|i| {
                let z: Vec<f64> = (0..d).map(|c| x[i][c] + out[i][c]).collect();
                let mu = z.iter().sum::<f64>() / d as f64;
                let var = z.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / d as f64;
                (0..d)
                    .map(|c| p.ln_gamma[c] * (z[c] - mu) / (var + cfg.layer_norm_eps).sqrt() + p.ln_beta[c])
                    .collect()
            })
            .collect()
    } else {
        out
    };
    let valid: Vec<usize> = (0..l).filter(|&i| mask[i]).collect();
    let pooled: Vec<f64> = (0..d)
        .map(|c| valid.iter().map(|&i| y[i][c]).sum::<f64>() / valid.len() as f64)
        .collect();
    let hidden: Vec<f64> = matvec(&pooled, &p.w_hidden, &p.b_hidden, cfg.d_hidden)
        .into_iter()
        .map(|a| a.max(0.0))
        .collect();
    let logit = matvec(&hidden, &p.w_out, &p.b_out, 1)[0];
    1.0 / (1.0 + (-logit).exp())
}

pub fn two_feature_problem(rng: &mut impl Rng, n: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
    loop {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![f64::from(rng.gen_range(0..4u8)), f64::from(rng.gen_range(0..3u8))])
            .collect();
        let y: Vec<Label> = x
            .iter()
            .map(|r| {
                let z = 0.8 * r[0] - 0.6 * r[1] - 0.4 + rng.gen_range(-1.5..1.5);
                Label::from_bool(z > 0.0)
            })
            .collect();
        if y.iter().filter(|l| l.is_positive()).count() >= 3
            && y.iter().filter(|l| !l.is_positive()).count() >= 3
        {
            return (x, y);
        }
    }
}

pub fn tiny_config(residual_norm: bool) -> AttentionConfig {
    AttentionConfig {
        d_model: 12,
        n_heads: 6,
        d_hidden: 8,
        residual_norm,
        ..AttentionConfig::new(5, 4)
    }
}

pub fn seq(ids: &[u32], real: usize) -> TokenSequence {
    TokenSequence {
        ids: ids.to_vec(),
        mask: (0..ids.len()).map(|i| i < real).collect(),
        truncated: false,
    }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na.max(nb) < 1e-10 {
        diff
    } else {
        diff / na.max(nb)
    }
}

/// Worst per-tensor relative error between analytic and central-difference
/// gradients of the loss on one sample.
pub fn gradient_check(residual: bool, dropout_seed: Option<u64>) -> Vec<(String, f64)> {
    let cfg = tiny_config(residual);
    let model = AttentionModel::new(cfg, 17).unwrap();
    let samples = [(seq(&[1, 4, 3, 2], 4), true), (seq(&[1, 3, 2, 0], 3), false)];
    let mut out = Vec::new();
    for (s, y) in &samples {
        let (_, analytic) = model.loss_and_grad(s, *y, dropout_seed).unwrap();
        let h = 1e-5;
        for (t, (name, grad)) in analytic.tensors().into_iter().enumerate() {
            let mut fd = vec![0.0; grad.len()];
            for i in 0..grad.len() {
                let mut plus = model.clone();
                plus.params_mut().tensors_mut()[t].1[i] += h;
                let mut minus = model.clone();
                minus.params_mut().tensors_mut()[t].1[i] -= h;
                let lp = plus.loss_and_grad(s, *y, dropout_seed).unwrap().0;
                let lm = minus.loss_and_grad(s, *y, dropout_seed).unwrap().0;
                fd[i] = (lp - lm) / (2.0 * h);
            }
            out.push((name.to_owned(), rel_err(grad, &fd)));
        }
    }
    out
}
