//! Transformer encoder block with adaptive modulation and gated residuals,
//! conditioned on a per-sample vector. Tokens are the users of each sample,
//! with no positional encoding.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{dropout, DropoutCtx};
use crate::numerics::ops::LN_EPS;
use crate::numerics::{Activation, Bound, ComplexMatrix, Graph, ParamId, ParamStore, Tensor, Var};

/// Token layout: `count` samples of `k` tokens each, row `b·k + i`.
#[derive(Clone, Debug)]
pub struct Tokens {
    pub count: usize,
    pub k: usize,
    pub sample: Arc<Vec<usize>>,
}

impl Tokens {
    pub fn new(count: usize, k: usize) -> Self {
        Self { count, k, sample: crate::nn::repeat_index(count, k) }
    }
}

/// Stacks CSI matrices as token rows `[Re h_k; Im h_k]`, giving a
/// `(count·K) × 2N_T` tensor.
pub fn csi_tokens(channels: &[ComplexMatrix]) -> Result<(Tensor, Tokens)> {
    let first = channels
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    let (n_t, k) = (first.rows(), first.cols());
    let mut data = Vec::with_capacity(channels.len() * k * 2 * n_t);
    for h in channels {
        if h.rows() != n_t || h.cols() != k {
            return Err(Error::shape("token batch", &[n_t, k], &[h.rows(), h.cols()]));
        }
        for c in 0..k {
            data.extend((0..n_t).map(|t| h.re().get(t, c)));
            data.extend((0..n_t).map(|t| h.im().get(t, c)));
        }
    }
    Ok((Tensor::from_raw(channels.len() * k, 2 * n_t, data), Tokens::new(channels.len(), k)))
}

/// Inverse of [`csi_tokens`]: row `i` of each sample becomes column `i`.
pub fn tokens_to_csi(t: &Tensor, tokens: &Tokens) -> Vec<ComplexMatrix> {
    let n_t = t.cols() / 2;
    (0..tokens.count)
        .map(|b| {
            let mut h = ComplexMatrix::zeros(n_t, tokens.k);
            for i in 0..tokens.k {
                let row = b * tokens.k + i;
                for r in 0..n_t {
                    h.set(r, i, (t.get(row, r), t.get(row, n_t + r)));
                }
            }
            h
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockShape {
    pub dim: usize,
    pub ffn: usize,
    pub heads: usize,
}

impl BlockShape {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.ffn == 0 || self.heads == 0 || self.dim % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "encoder width {} must be at least 2 and divisible by {} heads",
                self.dim, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }
}

#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub shape: BlockShape,
    pub v_scale: ParamId,
    pub v_shift: ParamId,
    pub v_gate: ParamId,
    pub w_q: Vec<ParamId>,
    pub w_k: Vec<ParamId>,
    pub w_v: Vec<ParamId>,
    pub w_o: ParamId,
    pub ffn_scale: ParamId,
    pub ffn_shift: ParamId,
    pub ffn_gate: ParamId,
    pub w1: ParamId,
    pub w2: ParamId,
}

impl EncoderBlock {
    pub fn new(store: &mut ParamStore, name: &str, shape: BlockShape, rng: &mut impl Rng) -> Result<Self> {
        shape.validate()?;
        let (d, dh) = (shape.dim, shape.head_dim());
        let mut sq = |store: &mut ParamStore, what: &str| {
            store.uniform(format!("{name}.{what}"), d, d, d, &mut *rng)
        };
        let v_scale = sq(store, "attn.scale");
        let v_shift = sq(store, "attn.shift");
        let v_gate = sq(store, "attn.gate");
        let w_o = sq(store, "attn.out");
        let ffn_scale = sq(store, "ffn.scale");
        let ffn_shift = sq(store, "ffn.shift");
        let ffn_gate = sq(store, "ffn.gate");
        let mut heads = |store: &mut ParamStore, what: &str| -> Vec<ParamId> {
            (0..shape.heads)
                .map(|c| store.uniform(format!("{name}.attn.{what}{c}"), d, dh, d, &mut *rng))
                .collect()
        };
        let w_q = heads(store, "q");
        let w_k = heads(store, "k");
        let w_v = heads(store, "v");
        let w1 = store.uniform(format!("{name}.ffn.w1"), d, shape.ffn, d, rng);
        let w2 = store.uniform(format!("{name}.ffn.w2"), shape.ffn, d, shape.ffn, rng);
        Ok(Self {
            shape,
            v_scale,
            v_shift,
            v_gate,
            w_q,
            w_k,
            w_v,
            w_o,
            ffn_scale,
            ffn_shift,
            ffn_gate,
            w1,
            w2,
        })
    }

    /// Per-token modulation rows `cond · V`, with `cond` given per sample.
    fn modulation(&self, g: &mut Graph, p: &Bound, tokens: &Tokens, cond: Var, v: ParamId) -> Result<Var> {
        let m = g.matmul(cond, p[v])?;
        g.gather_rows(m, tokens.sample.clone())
    }

    fn modulate(
        &self,
        g: &mut Graph,
        p: &Bound,
        tokens: &Tokens,
        h: Var,
        cond: Var,
        scale: ParamId,
        shift: ParamId,
    ) -> Result<Var> {
        let ln = g.layer_norm_rows(h, LN_EPS)?;
        let s = self.modulation(g, p, tokens, cond, scale)?;
        let t = self.modulation(g, p, tokens, cond, shift)?;
        let y = g.mul(ln, s)?;
        g.add(y, t)
    }

    /// `h` is `(count·K) × D`, `cond` is `count × D`.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Bound,
        tokens: &Tokens,
        h: Var,
        cond: Var,
        mut drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<Var> {
        let am = self.modulate(g, p, tokens, h, cond, self.v_scale, self.v_shift)?;
        let inv = 1.0 / (self.shape.head_dim() as f64).sqrt();
        let mut outs = Vec::with_capacity(self.shape.heads);
        for c in 0..self.shape.heads {
            let q = g.matmul(am, p[self.w_q[c]])?;
            let k = g.matmul(am, p[self.w_k[c]])?;
            let v = g.matmul(am, p[self.w_v[c]])?;
            let scores = g.block_matmul(q, k, tokens.count, true)?;
            let scores = g.scale(scores, inv);
            let attn = g.softmax_rows(scores);
            let attn = dropout(g, attn, drop.as_deref_mut())?;
            outs.push(g.block_matmul(attn, v, tokens.count, false)?);
        }
        let cat = g.concat_cols(&outs)?;
        let mha = g.matmul(cat, p[self.w_o])?;
        let gate = self.modulation(g, p, tokens, cond, self.v_gate)?;
        let gated = g.mul(mha, gate)?;
        let h = g.add(h, gated)?;

        let am = self.modulate(g, p, tokens, h, cond, self.ffn_scale, self.ffn_shift)?;
        let hidden = g.matmul(am, p[self.w1])?;
        let hidden = g.activation(hidden, Activation::Gelu);
        let hidden = dropout(g, hidden, drop)?;
        let ffn = g.matmul(hidden, p[self.w2])?;
        let gate = self.modulation(g, p, tokens, cond, self.ffn_gate)?;
        let gated = g.mul(ffn, gate)?;
        g.add(h, gated)
    }
}
