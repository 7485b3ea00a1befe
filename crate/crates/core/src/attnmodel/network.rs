use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AttentionConfig, AttentionModel, AttentionTensor, Params};
use crate::encoding::TokenSequence;
use crate::error::{Error, Result};

pub(super) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(super) fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

/// `out[r] = x[r] · W + b` for `rows` rows.
fn linear(x: &[f64], rows: usize, w: &[f64], b: &[f64], din: usize, dout: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * dout);
    for r in 0..rows {
        out.extend_from_slice(b);
        let o = &mut out[r * dout..(r + 1) * dout];
        for (i, &xi) in x[r * din..(r + 1) * din].iter().enumerate() {
            if xi != 0.0 {
                for (oj, wij) in o.iter_mut().zip(&w[i * dout..(i + 1) * dout]) {
                    *oj += xi * wij;
                }
            }
        }
    }
    out
}

/// Accumulate gradients of `out = x · W + b` and return `d x`.
#[allow(clippy::too_many_arguments)]
fn linear_backward(
    x: &[f64],
    dout_v: &[f64],
    rows: usize,
    w: &[f64],
    din: usize,
    dout: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * din];
    for r in 0..rows {
        let g = &dout_v[r * dout..(r + 1) * dout];
        for (dbj, gj) in db.iter_mut().zip(g) {
            *dbj += gj;
        }
        for i in 0..din {
            let xi = x[r * din + i];
            let wrow = &w[i * dout..(i + 1) * dout];
            let dwrow = &mut dw[i * dout..(i + 1) * dout];
            let mut acc = 0.0;
            for j in 0..dout {
                dwrow[j] += xi * g[j];
                acc += wrow[j] * g[j];
            }
            dx[r * din + i] = acc;
        }
    }
    dx
}

pub(super) struct Cache {
    ids: Vec<usize>,
    mask: Vec<bool>,
    n_valid: usize,
    x0: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// `[head][query][key]`, flattened.
    attn: Vec<f64>,
    ctx: Vec<f64>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    pooled_d: Vec<f64>,
    drop1: Vec<f64>,
    pre1: Vec<f64>,
    h_d: Vec<f64>,
    drop2: Vec<f64>,
    pub(super) logit: f64,
}

impl Cache {
    pub(super) fn attention_tensor(&self, cfg: &AttentionConfig) -> AttentionTensor {
        let l = cfg.max_len;
        let scores = (0..cfg.n_heads)
            .map(|h| {
                (0..l)
                    .map(|i| self.attn[(h * l + i) * l..(h * l + i + 1) * l].to_vec())
                    .collect()
            })
            .collect();
        AttentionTensor {
            scores,
            mask: self.mask.clone(),
        }
    }
}

fn dropout_mask(n: usize, rate: f64, rng: Option<&mut ChaCha8Rng>) -> Vec<f64> {
    match rng {
        Some(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            (0..n)
                .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                .collect()
        }
        _ => vec![1.0; n],
    }
}

impl AttentionModel {
    pub(super) fn check_sequence(&self, seq: &TokenSequence) -> Result<()> {
        let cfg = &self.config;
        if seq.ids.len() != cfg.max_len || seq.mask.len() != cfg.max_len {
            return Err(Error::DimensionMismatch {
                expected: cfg.max_len,
                actual: seq.ids.len(),
            });
        }
        if let Some(id) = seq.ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
            return Err(Error::InvalidParameter(format!(
                "token id {id} outside vocabulary of size {}",
                cfg.vocab_size
            )));
        }
        if !seq.mask.iter().any(|m| *m) {
            return Err(Error::Precondition("sequence has no real tokens".into()));
        }
        Ok(())
    }

    pub(super) fn forward_cached(
        &self,
        seq: &TokenSequence,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Cache> {
        self.check_sequence(seq)?;
        let cfg = &self.config;
        let p = &self.params;
        let (l, d, nh, dh, f) = (
            cfg.max_len,
            cfg.d_model,
            cfg.n_heads,
            cfg.head_dim(),
            cfg.d_hidden,
        );
        let ids: Vec<usize> = seq.ids.iter().map(|&i| i as usize).collect();
        let mask = seq.mask.clone();
        let n_valid = mask.iter().filter(|m| **m).count();

        let mut x0 = vec![0.0; l * d];
        for (pos, &id) in ids.iter().enumerate() {
            for c in 0..d {
                x0[pos * d + c] = p.embedding[id * d + c] + self.positional[pos * d + c];
            }
        }
        let q = linear(&x0, l, &p.w_q, &p.b_q, d, d);
        let k = linear(&x0, l, &p.w_k, &p.b_k, d, d);
        let v = linear(&x0, l, &p.w_v, &p.b_v, d, d);

        let scale = 1.0 / (dh as f64).sqrt();
        let mut attn = vec![0.0; nh * l * l];
        let mut ctx = vec![0.0; l * d];
        let mut s = vec![0.0; l];
        for h in 0..nh {
            let off = h * dh;
            for i in 0..l {
                let mut max = f64::NEG_INFINITY;
                for j in (0..l).filter(|&j| mask[j]) {
                    let mut dot = 0.0;
                    for c in 0..dh {
                        dot += q[i * d + off + c] * k[j * d + off + c];
                    }
                    s[j] = dot * scale;
                    max = max.max(s[j]);
                }
                let row = &mut attn[(h * l + i) * l..(h * l + i + 1) * l];
                let mut sum = 0.0;
                for j in (0..l).filter(|&j| mask[j]) {
                    row[j] = (s[j] - max).exp();
                    sum += row[j];
                }
                for j in (0..l).filter(|&j| mask[j]) {
                    row[j] /= sum;
                    for c in 0..dh {
                        ctx[i * d + off + c] += row[j] * v[j * d + off + c];
                    }
                }
            }
        }
        let attn_out = linear(&ctx, l, &p.w_o, &p.b_o, d, d);

        let (y, xhat, inv_std) = if cfg.residual_norm {
            let mut xhat = vec![0.0; l * d];
            let mut inv_std = vec![0.0; l];
            let mut y = vec![0.0; l * d];
            for i in 0..l {
                let z: Vec<f64> = (0..d).map(|c| x0[i * d + c] + attn_out[i * d + c]).collect();
                let mu = z.iter().sum::<f64>() / d as f64;
                let var = z.iter().map(|zc| (zc - mu) * (zc - mu)).sum::<f64>() / d as f64;
                let is = 1.0 / (var + cfg.layer_norm_eps).sqrt();
                inv_std[i] = is;
                for c in 0..d {
                    let xh = (z[c] - mu) * is;
                    xhat[i * d + c] = xh;
                    y[i * d + c] = p.ln_gamma[c] * xh + p.ln_beta[c];
                }
            }
            (y, xhat, inv_std)
        } else {
            (attn_out, Vec::new(), Vec::new())
        };

        let mut pooled = vec![0.0; d];
        for i in (0..l).filter(|&i| mask[i]) {
            for c in 0..d {
                pooled[c] += y[i * d + c];
            }
        }
        pooled.iter_mut().for_each(|v| *v /= n_valid as f64);

        let drop1 = dropout_mask(d, cfg.dropout, rng.as_deref_mut());
        let pooled_d: Vec<f64> = pooled.iter().zip(&drop1).map(|(a, m)| a * m).collect();
        let pre1 = linear(&pooled_d, 1, &p.w_hidden, &p.b_hidden, d, f);
        let drop2 = dropout_mask(f, cfg.dropout, rng);
        let h_d: Vec<f64> = pre1.iter().zip(&drop2).map(|(a, m)| a.max(0.0) * m).collect();
        let logit = h_d.iter().zip(&p.w_out).map(|(a, b)| a * b).sum::<f64>() + p.b_out[0];

        Ok(Cache {
            ids,
            mask,
            n_valid,
            x0,
            q,
            k,
            v,
            attn,
            ctx,
            xhat,
            inv_std,
            pooled_d,
            drop1,
            pre1,
            h_d,
            drop2,
            logit,
        })
    }

    /// Gradients of the per-sample loss given `dlogit = ∂loss/∂logit`.
    pub(super) fn backward(&self, c: &Cache, dlogit: f64) -> Params {
        let cfg = &self.config;
        let p = &self.params;
        let (l, d, nh, dh, f) = (
            cfg.max_len,
            cfg.d_model,
            cfg.n_heads,
            cfg.head_dim(),
            cfg.d_hidden,
        );
        let mut g = Params::zeros(cfg);

        // Output unit and hidden layer.
        g.b_out[0] = dlogit;
        let mut dpre1 = vec![0.0; f];
        for j in 0..f {
            g.w_out[j] = c.h_d[j] * dlogit;
            dpre1[j] = if c.pre1[j] > 0.0 {
                p.w_out[j] * dlogit * c.drop2[j]
            } else {
                0.0
            };
        }
        let dpooled_d = linear_backward(
            &c.pooled_d,
            &dpre1,
            1,
            &p.w_hidden,
            d,
            f,
            &mut g.w_hidden,
            &mut g.b_hidden,
        );

        // Dropout and masked mean pooling.
        let mut dy = vec![0.0; l * d];
        for i in (0..l).filter(|&i| c.mask[i]) {
            for ch in 0..d {
                dy[i * d + ch] = dpooled_d[ch] * c.drop1[ch] / c.n_valid as f64;
            }
        }

        // Optional residual + layer norm.
        let mut dx0 = vec![0.0; l * d];
        let dattn_out = if cfg.residual_norm {
            let mut dz = vec![0.0; l * d];
            for i in (0..l).filter(|&i| c.mask[i]) {
                let row = i * d;
                let mut mean_dxh = 0.0;
                let mut mean_dxh_xh = 0.0;
                for ch in 0..d {
                    let dxh = dy[row + ch] * p.ln_gamma[ch];
                    g.ln_gamma[ch] += dy[row + ch] * c.xhat[row + ch];
                    g.ln_beta[ch] += dy[row + ch];
                    mean_dxh += dxh;
                    mean_dxh_xh += dxh * c.xhat[row + ch];
                }
                mean_dxh /= d as f64;
                mean_dxh_xh /= d as f64;
                for ch in 0..d {
                    let dxh = dy[row + ch] * p.ln_gamma[ch];
                    dz[row + ch] = c.inv_std[i] * (dxh - mean_dxh - c.xhat[row + ch] * mean_dxh_xh);
                }
            }
            dx0.copy_from_slice(&dz);
            dz
        } else {
            dy
        };

        let dctx = linear_backward(&c.ctx, &dattn_out, l, &p.w_o, d, d, &mut g.w_o, &mut g.b_o);

        // Attention heads.
        let scale = 1.0 / (dh as f64).sqrt();
        let mut dq = vec![0.0; l * d];
        let mut dk = vec![0.0; l * d];
        let mut dv = vec![0.0; l * d];
        let mut da = vec![0.0; l];
        for h in 0..nh {
            let off = h * dh;
            for i in 0..l {
                let gi = &dctx[i * d + off..i * d + off + dh];
                if gi.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let row = &c.attn[(h * l + i) * l..(h * l + i + 1) * l];
                let mut weighted = 0.0;
                for j in (0..l).filter(|&j| c.mask[j]) {
                    let mut dot = 0.0;
                    for ch in 0..dh {
                        dot += gi[ch] * c.v[j * d + off + ch];
                        dv[j * d + off + ch] += row[j] * gi[ch];
                    }
                    da[j] = dot;
                    weighted += row[j] * dot;
                }
                for j in (0..l).filter(|&j| c.mask[j]) {
                    let ds = row[j] * (da[j] - weighted) * scale;
                    for ch in 0..dh {
                        dq[i * d + off + ch] += ds * c.k[j * d + off + ch];
                        dk[j * d + off + ch] += ds * c.q[i * d + off + ch];
                    }
                }
            }
        }
        for (dproj, w, gw, gb) in [
            (&dq, &p.w_q, &mut g.w_q, &mut g.b_q),
            (&dk, &p.w_k, &mut g.w_k, &mut g.b_k),
            (&dv, &p.w_v, &mut g.w_v, &mut g.b_v),
        ] {
            let dx = linear_backward(&c.x0, dproj, l, w, d, d, gw, gb);
            dx0.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        }
        for (pos, &id) in c.ids.iter().enumerate() {
            for ch in 0..d {
                g.embedding[id * d + ch] += dx0[pos * d + ch];
            }
        }
        g
    }
}
