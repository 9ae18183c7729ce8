//! Forward and backward passes.
//!
//! The forward pass is strictly incremental: [`Activations::push`] appends one
//! position and caches everything the backward pass needs. Full-sequence
//! evaluation, KV-cached decoding and training all go through `push`, so decoding
//! is bit-identical to a full forward by construction.

use rayon::prelude::*;

use super::{BlockOffsets, Parameters};
use crate::error::{Error, Result};
use crate::vocab::TokenId;

const LN_EPS: f64 = 1e-5;
/// Sequences per gradient accumulation buffer. Fixed so the reduction order never
/// depends on the number of workers.
const GRAD_CHUNK: usize = 4;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `out = bias + x · weight` with `weight` stored `[in, out]` row-major.
#[inline]
fn affine(x: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let n = out.len();
    out.copy_from_slice(bias);
    for (i, &xi) in x.iter().enumerate() {
        axpy(out, xi, &weight[i * n..(i + 1) * n]);
    }
}

/// Backward of [`affine`] for one row: accumulates weight/bias gradients and
/// writes (overwrites) the input gradient.
#[inline]
fn affine_backward(
    x: &[f64],
    weight: &[f64],
    dout: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    dx: &mut [f64],
) {
    let n = dout.len();
    axpy(dbias, 1.0, dout);
    for (i, &xi) in x.iter().enumerate() {
        let row = i * n..(i + 1) * n;
        axpy(&mut dweight[row.clone()], xi, dout);
        dx[i] = dot(&weight[row], dout);
    }
}

fn layernorm(x: &[f64], gain: &[f64], bias: &[f64], xhat: &mut [f64], out: &mut [f64]) -> f64 {
    let d = x.len() as f64;
    let mean = x.iter().sum::<f64>() / d;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    let rstd = 1.0 / (var + LN_EPS).sqrt();
    for i in 0..x.len() {
        xhat[i] = (x[i] - mean) * rstd;
        out[i] = gain[i] * xhat[i] + bias[i];
    }
    rstd
}

/// Accumulates `dx += d(loss)/dx` and the gain/bias gradients (`dparams` holds
/// gain then bias, contiguous).
fn layernorm_backward(dy: &[f64], xhat: &[f64], rstd: f64, gain: &[f64], dparams: &mut [f64], dx: &mut [f64]) {
    let d = dy.len();
    let (dgain, dbias) = dparams.split_at_mut(d);
    let mut mean_dxhat = 0.0;
    let mut mean_dxhat_xhat = 0.0;
    for i in 0..d {
        dgain[i] += dy[i] * xhat[i];
        dbias[i] += dy[i];
        let g = dy[i] * gain[i];
        mean_dxhat += g;
        mean_dxhat_xhat += g * xhat[i];
    }
    mean_dxhat /= d as f64;
    mean_dxhat_xhat /= d as f64;
    for i in 0..d {
        let g = dy[i] * gain[i];
        dx[i] += rstd * (g - mean_dxhat - xhat[i] * mean_dxhat_xhat);
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[inline]
fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

#[inline]
fn gelu_grad(x: f64) -> f64 {
    let th = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

fn log_softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    let lse = max + sum.ln();
    for (o, z) in out.iter_mut().zip(logits) {
        *o = z - lse;
    }
}

#[derive(Debug, Default, Clone)]
struct BlockActs {
    ln1_xhat: Vec<f64>,
    ln1_rstd: Vec<f64>,
    ln1_out: Vec<f64>,
    qkv: Vec<f64>,
    /// Attention probabilities; position `p` holds `heads * (p + 1)` values.
    att: Vec<f64>,
    att_cat: Vec<f64>,
    ln2_xhat: Vec<f64>,
    ln2_rstd: Vec<f64>,
    ln2_out: Vec<f64>,
    fc_pre: Vec<f64>,
    fc_act: Vec<f64>,
}

/// Incremental forward state over one sequence (doubles as the KV cache).
#[derive(Debug, Clone)]
pub struct Activations<'a> {
    params: &'a Parameters,
    tokens: Vec<TokenId>,
    blocks: Vec<BlockActs>,
    lnf_xhat: Vec<f64>,
    lnf_rstd: Vec<f64>,
    lnf_out: Vec<f64>,
    logprobs: Vec<f64>,
    resid: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Activations<'a> {
    pub fn new(params: &'a Parameters) -> Self {
        Activations {
            params,
            tokens: Vec::new(),
            blocks: vec![BlockActs::default(); params.config.num_layers],
            lnf_xhat: Vec::new(),
            lnf_rstd: Vec::new(),
            lnf_out: Vec::new(),
            logprobs: Vec::new(),
            resid: Vec::new(),
            scratch: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    /// Log-distribution over the token following position `pos`.
    pub fn logprobs(&self, pos: usize) -> &[f64] {
        let v = self.params.config.vocab_size;
        &self.logprobs[pos * v..(pos + 1) * v]
    }

    /// Appends `token` and returns the next-token log-distribution.
    pub fn push(&mut self, token: TokenId) -> Result<&[f64]> {
        let cfg = self.params.config;
        let (v, d, m, nh) = (cfg.vocab_size, cfg.embed_dim, cfg.mlp_dim, cfg.num_heads);
        let dh = cfg.head_dim();
        let p = self.tokens.len();
        if p >= cfg.context_length {
            return Err(Error::ContextOverflow { len: p + 1, max: cfg.context_length });
        }
        if token as usize >= v {
            return Err(Error::InvalidArgument(format!("token {token} outside vocabulary of {v}")));
        }
        let layout = &self.params.layout;
        let w = self.params.data.as_slice();
        self.tokens.push(token);

        let mut x: Vec<f64> = w[layout.tok_emb + token as usize * d..][..d]
            .iter()
            .zip(&w[layout.pos_emb + p * d..][..d])
            .map(|(a, b)| a + b)
            .collect();
        let scale = 1.0 / (dh as f64).sqrt();
        let scratch = &mut self.scratch;

        for (off, acts) in layout.blocks.iter().zip(self.blocks.iter_mut()) {
            let BlockOffsets {
                ln1_gain,
                ln1_bias,
                qkv_weight,
                qkv_bias,
                out_weight,
                out_bias,
                ln2_gain,
                ln2_bias,
                fc_weight,
                fc_bias,
                proj_weight,
                proj_bias,
            } = *off;

            let row = p * d..(p + 1) * d;
            acts.ln1_xhat.resize((p + 1) * d, 0.0);
            acts.ln1_out.resize((p + 1) * d, 0.0);
            let rstd = layernorm(
                &x,
                &w[ln1_gain..ln1_gain + d],
                &w[ln1_bias..ln1_bias + d],
                &mut acts.ln1_xhat[row.clone()],
                &mut acts.ln1_out[row.clone()],
            );
            acts.ln1_rstd.push(rstd);

            acts.qkv.resize((p + 1) * 3 * d, 0.0);
            affine(
                &acts.ln1_out[row.clone()],
                &w[qkv_weight..qkv_weight + d * 3 * d],
                &w[qkv_bias..qkv_bias + 3 * d],
                &mut acts.qkv[p * 3 * d..(p + 1) * 3 * d],
            );

            acts.att_cat.resize((p + 1) * d, 0.0);
            let att_base = acts.att.len();
            acts.att.resize(att_base + nh * (p + 1), 0.0);
            for h in 0..nh {
                let q = &acts.qkv[p * 3 * d + h * dh..][..dh];
                let probs = &mut acts.att[att_base + h * (p + 1)..][..p + 1];
                for (s, pr) in probs.iter_mut().enumerate() {
                    *pr = dot(q, &acts.qkv[s * 3 * d + d + h * dh..][..dh]) * scale;
                }
                let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for pr in probs.iter_mut() {
                    *pr = (*pr - max).exp();
                    sum += *pr;
                }
                for pr in probs.iter_mut() {
                    *pr /= sum;
                }
                let out = &mut acts.att_cat[p * d + h * dh..][..dh];
                for (s, &pr) in probs.iter().enumerate() {
                    axpy(out, pr, &acts.qkv[s * 3 * d + 2 * d + h * dh..][..dh]);
                }
            }

            scratch.resize(d.max(m), 0.0);
            affine(
                &acts.att_cat[row.clone()],
                &w[out_weight..out_weight + d * d],
                &w[out_bias..out_bias + d],
                &mut scratch[..d],
            );
            axpy(&mut x, 1.0, &scratch[..d]);

            acts.ln2_xhat.resize((p + 1) * d, 0.0);
            acts.ln2_out.resize((p + 1) * d, 0.0);
            let rstd = layernorm(
                &x,
                &w[ln2_gain..ln2_gain + d],
                &w[ln2_bias..ln2_bias + d],
                &mut acts.ln2_xhat[row.clone()],
                &mut acts.ln2_out[row.clone()],
            );
            acts.ln2_rstd.push(rstd);

            acts.fc_pre.resize((p + 1) * m, 0.0);
            affine(
                &acts.ln2_out[row.clone()],
                &w[fc_weight..fc_weight + d * m],
                &w[fc_bias..fc_bias + m],
                &mut acts.fc_pre[p * m..(p + 1) * m],
            );
            acts.fc_act.extend(acts.fc_pre[p * m..(p + 1) * m].iter().map(|&z| gelu(z)));
            affine(
                &acts.fc_act[p * m..(p + 1) * m],
                &w[proj_weight..proj_weight + m * d],
                &w[proj_bias..proj_bias + d],
                &mut scratch[..d],
            );
            axpy(&mut x, 1.0, &scratch[..d]);
        }

        self.resid.extend_from_slice(&x);
        let row = p * d..(p + 1) * d;
        self.lnf_xhat.resize((p + 1) * d, 0.0);
        self.lnf_out.resize((p + 1) * d, 0.0);
        let rstd = layernorm(
            &x,
            &w[layout.lnf_gain..layout.lnf_gain + d],
            &w[layout.lnf_bias..layout.lnf_bias + d],
            &mut self.lnf_xhat[row.clone()],
            &mut self.lnf_out[row.clone()],
        );
        self.lnf_rstd.push(rstd);
        scratch.resize(v.max(d).max(m), 0.0);
        affine(
            &self.lnf_out[row],
            &w[layout.head_weight..layout.head_weight + d * v],
            &w[layout.head_bias..layout.head_bias + v],
            &mut scratch[..v],
        );
        self.logprobs.resize((p + 1) * v, 0.0);
        log_softmax(&scratch[..v], &mut self.logprobs[p * v..(p + 1) * v]);
        Ok(&self.logprobs[p * v..(p + 1) * v])
    }

    /// Accumulates into `grads` the gradient of `sum(dlogits * logits)` over all
    /// cached positions (`dlogits` is `[len, vocab]`).
    pub fn backward(&self, dlogits: &[f64], grads: &mut Parameters) {
        let cfg = self.params.config;
        let (v, d, m, nh) = (cfg.vocab_size, cfg.embed_dim, cfg.mlp_dim, cfg.num_heads);
        let dh = cfg.head_dim();
        let n = self.len();
        assert_eq!(dlogits.len(), n * v);
        let layout = &self.params.layout;
        let w = self.params.data.as_slice();
        let g = grads.data.as_mut_slice();
        let scale = 1.0 / (dh as f64).sqrt();

        let mut dx = vec![0.0; n * d];
        let mut dy = vec![0.0; d.max(m)];
        for p in 0..n {
            let dl = &dlogits[p * v..(p + 1) * v];
            if dl.iter().all(|&z| z == 0.0) {
                continue;
            }
            let (dw, db) = g[layout.head_weight..layout.head_bias + v].split_at_mut(d * v);
            affine_backward(
                &self.lnf_out[p * d..(p + 1) * d],
                &w[layout.head_weight..layout.head_weight + d * v],
                dl,
                dw,
                db,
                &mut dy[..d],
            );
            layernorm_backward(
                &dy[..d],
                &self.lnf_xhat[p * d..(p + 1) * d],
                self.lnf_rstd[p],
                &w[layout.lnf_gain..layout.lnf_gain + d],
                &mut g[layout.lnf_gain..layout.lnf_gain + 2 * d],
                &mut dx[p * d..(p + 1) * d],
            );
        }

        let mut dqkv = vec![0.0; n * 3 * d];
        let mut datt = vec![0.0; n * d];
        let mut dprob = vec![0.0; n];
        for (off, acts) in layout.blocks.iter().zip(&self.blocks).rev() {
            // MLP branch; dx becomes the gradient at the attention residual output.
            let mut dx_mid = dx.clone();
            for p in 0..n {
                let dout = &dx[p * d..(p + 1) * d];
                let (dw, db) = g[off.proj_weight..off.proj_bias + d].split_at_mut(m * d);
                affine_backward(
                    &acts.fc_act[p * m..(p + 1) * m],
                    &w[off.proj_weight..off.proj_weight + m * d],
                    dout,
                    dw,
                    db,
                    &mut dy[..m],
                );
                for (j, dj) in dy[..m].iter_mut().enumerate() {
                    *dj *= gelu_grad(acts.fc_pre[p * m + j]);
                }
                let (dw, db) = g[off.fc_weight..off.fc_bias + m].split_at_mut(d * m);
                let mut dln = vec![0.0; d];
                affine_backward(
                    &acts.ln2_out[p * d..(p + 1) * d],
                    &w[off.fc_weight..off.fc_weight + d * m],
                    &dy[..m],
                    dw,
                    db,
                    &mut dln,
                );
                layernorm_backward(
                    &dln,
                    &acts.ln2_xhat[p * d..(p + 1) * d],
                    acts.ln2_rstd[p],
                    &w[off.ln2_gain..off.ln2_gain + d],
                    &mut g[off.ln2_gain..off.ln2_gain + 2 * d],
                    &mut dx_mid[p * d..(p + 1) * d],
                );
            }

            // Attention output projection.
            for p in 0..n {
                let (dw, db) = g[off.out_weight..off.out_bias + d].split_at_mut(d * d);
                affine_backward(
                    &acts.att_cat[p * d..(p + 1) * d],
                    &w[off.out_weight..off.out_weight + d * d],
                    &dx_mid[p * d..(p + 1) * d],
                    dw,
                    db,
                    &mut datt[p * d..(p + 1) * d],
                );
            }

            // Scaled dot-product attention.
            dqkv.fill(0.0);
            let mut att_base = 0;
            for p in 0..n {
                for h in 0..nh {
                    let probs = &acts.att[att_base + h * (p + 1)..][..p + 1];
                    let dout = &datt[p * d + h * dh..][..dh];
                    let mut weighted = 0.0;
                    for s in 0..=p {
                        let vs = &acts.qkv[s * 3 * d + 2 * d + h * dh..][..dh];
                        dprob[s] = dot(dout, vs);
                        weighted += probs[s] * dprob[s];
                        axpy(&mut dqkv[s * 3 * d + 2 * d + h * dh..][..dh], probs[s], dout);
                    }
                    let q = &acts.qkv[p * 3 * d + h * dh..][..dh];
                    for s in 0..=p {
                        let dscore = probs[s] * (dprob[s] - weighted) * scale;
                        if dscore == 0.0 {
                            continue;
                        }
                        let ks = &acts.qkv[s * 3 * d + d + h * dh..][..dh];
                        axpy(&mut dqkv[p * 3 * d + h * dh..][..dh], dscore, ks);
                        axpy(&mut dqkv[s * 3 * d + d + h * dh..][..dh], dscore, q);
                    }
                }
                att_base += nh * (p + 1);
            }

            dx.copy_from_slice(&dx_mid);
            let mut dln = vec![0.0; d];
            for p in 0..n {
                let (dw, db) = g[off.qkv_weight..off.qkv_bias + 3 * d].split_at_mut(d * 3 * d);
                affine_backward(
                    &acts.ln1_out[p * d..(p + 1) * d],
                    &w[off.qkv_weight..off.qkv_weight + d * 3 * d],
                    &dqkv[p * 3 * d..(p + 1) * 3 * d],
                    dw,
                    db,
                    &mut dln,
                );
                layernorm_backward(
                    &dln,
                    &acts.ln1_xhat[p * d..(p + 1) * d],
                    acts.ln1_rstd[p],
                    &w[off.ln1_gain..off.ln1_gain + d],
                    &mut g[off.ln1_gain..off.ln1_gain + 2 * d],
                    &mut dx[p * d..(p + 1) * d],
                );
            }
        }

        for (p, &tok) in self.tokens.iter().enumerate() {
            let grad = &dx[p * d..(p + 1) * d];
            axpy(&mut g[layout.tok_emb + tok as usize * d..][..d], 1.0, grad);
            axpy(&mut g[layout.pos_emb + p * d..][..d], 1.0, grad);
        }
    }
}

/// Per-position next-token log-probabilities, `[len, vocab]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbTable {
    pub vocab_size: usize,
    pub values: Vec<f64>,
}

impl LogProbTable {
    pub fn len(&self) -> usize {
        self.values.len() / self.vocab_size
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, pos: usize) -> &[f64] {
        &self.values[pos * self.vocab_size..(pos + 1) * self.vocab_size]
    }
}

pub fn forward(params: &Parameters, tokens: &[TokenId]) -> Result<LogProbTable> {
    let max = params.config.context_length;
    if tokens.len() > max {
        return Err(Error::ContextOverflow { len: tokens.len(), max });
    }
    let mut acts = Activations::new(params);
    for &t in tokens {
        acts.push(t)?;
    }
    Ok(LogProbTable { vocab_size: params.config.vocab_size, values: acts.logprobs })
}

/// One training sequence: `continuation` tokens are scored given everything
/// before them; `mask` selects policy-chosen tokens and `weights` scales each.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceExample {
    pub context: Vec<TokenId>,
    pub continuation: Vec<TokenId>,
    pub mask: Vec<bool>,
    pub weights: Vec<f64>,
}

impl SequenceExample {
    pub fn uniform(context: Vec<TokenId>, continuation: Vec<TokenId>, mask: Vec<bool>, weight: f64) -> Self {
        let weights = vec![weight; continuation.len()];
        SequenceExample { context, continuation, mask, weights }
    }

    fn validate(&self, max: usize) -> Result<()> {
        let len = self.context.len() + self.continuation.len();
        if len > max {
            return Err(Error::ContextOverflow { len, max });
        }
        if self.mask.len() != self.continuation.len() || self.weights.len() != self.continuation.len() {
            return Err(Error::InvalidArgument(format!(
                "continuation of {} tokens with {} mask bits and {} weights",
                self.continuation.len(),
                self.mask.len(),
                self.weights.len()
            )));
        }
        if self.context.is_empty() && !self.continuation.is_empty() {
            return Err(Error::InvalidArgument("continuation needs a non-empty context".into()));
        }
        Ok(())
    }

    fn active(&self) -> impl Iterator<Item = (usize, TokenId, f64)> + '_ {
        self.continuation
            .iter()
            .zip(&self.mask)
            .zip(&self.weights)
            .enumerate()
            .filter(|(_, ((_, &m), &w))| m && w != 0.0)
            .map(|(j, ((&t, _), &w))| (j, t, w))
    }
}

fn run_prefix<'a>(params: &'a Parameters, ex: &SequenceExample, upto: usize) -> Result<Activations<'a>> {
    let mut acts = Activations::new(params);
    for &t in ex.context.iter().chain(&ex.continuation).take(upto) {
        acts.push(t)?;
    }
    Ok(acts)
}

/// Sum of masked continuation log-probabilities, plus the per-token terms (zero
/// where the mask is false).
pub fn sequence_logprob(
    params: &Parameters,
    context: &[TokenId],
    continuation: &[TokenId],
    mask: &[bool],
) -> Result<(f64, Vec<f64>)> {
    let ex = SequenceExample::uniform(context.to_vec(), continuation.to_vec(), mask.to_vec(), 1.0);
    ex.validate(params.config.context_length)?;
    let Some(last) = mask.iter().rposition(|&b| b) else {
        return Ok((0.0, vec![0.0; continuation.len()]));
    };
    let acts = run_prefix(params, &ex, context.len() + last)?;
    let mut terms = vec![0.0; continuation.len()];
    let mut total = 0.0;
    for (j, (&tok, &m)) in continuation.iter().zip(mask).enumerate() {
        if m {
            terms[j] = acts.logprobs(context.len() + j - 1)[tok as usize];
            total += terms[j];
        }
    }
    Ok((total, terms))
}

fn example_gradient(params: &Parameters, ex: &SequenceExample, scale: f64, grads: &mut Parameters) -> Result<f64> {
    let Some(last) = ex.active().map(|(j, _, _)| j).last() else {
        return Ok(0.0);
    };
    let ctx = ex.context.len();
    let acts = run_prefix(params, ex, ctx + last)?;
    let v = params.config.vocab_size;
    let mut dlogits = vec![0.0; acts.len() * v];
    let mut loss = 0.0;
    for (j, tok, weight) in ex.active() {
        let pos = ctx + j - 1;
        let row = acts.logprobs(pos);
        loss -= scale * weight * row[tok as usize];
        let coef = -scale * weight;
        let dl = &mut dlogits[pos * v..(pos + 1) * v];
        for (k, (dk, lp)) in dl.iter_mut().zip(row).enumerate() {
            let target = if k == tok as usize { 1.0 } else { 0.0 };
            *dk += coef * (target - lp.exp());
        }
    }
    acts.backward(&dlogits, grads);
    Ok(loss)
}

/// `loss = -(1/B) Σ_b Σ_masked weight · log p`, with exact gradients.
pub fn loss_and_gradients(params: &Parameters, batch: &[SequenceExample]) -> Result<(f64, Parameters)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let max = params.config.context_length;
    for ex in batch {
        ex.validate(max)?;
    }
    let scale = 1.0 / batch.len() as f64;
    let partials: Vec<(f64, Parameters)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = params.zeros_like();
            let mut loss = 0.0;
            for ex in chunk {
                loss += example_gradient(params, ex, scale, &mut grads)?;
            }
            Ok((loss, grads))
        })
        .collect::<Result<_>>()?;
    let mut parts = partials.into_iter();
    let (mut loss, mut grads) = parts.next().expect("non-empty batch");
    for (l, g) in parts {
        loss += l;
        grads.add_scaled(&g, 1.0);
    }
    Ok((loss, grads))
}
