use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{csi_tokens, tokens_to_csi, BlockShape, EncoderBlock, Tokens};
use crate::error::{Error, Result};
use crate::nn::{DropoutCtx, Mlp};
use crate::numerics::{Bound, ComplexMatrix, Graph, ParamId, ParamStore, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebertConfig {
    pub dim: usize,
    pub ffn: usize,
    pub heads: usize,
    pub score_blocks: usize,
    /// Hidden width of the step-size MLP.
    pub step_hidden: usize,
}

impl Default for DebertConfig {
    fn default() -> Self {
        Self { dim: 64, ffn: 256, heads: 4, score_blocks: 4, step_hidden: 64 }
    }
}

impl DebertConfig {
    pub fn block_shape(&self) -> BlockShape {
        BlockShape { dim: self.dim, ffn: self.ffn, heads: self.heads }
    }
}

/// Score, denoising direction, per-user complex step and refined CSI.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseResult {
    pub score: ComplexMatrix,
    pub delta: ComplexMatrix,
    pub eta: Vec<(f64, f64)>,
    pub h_hat: ComplexMatrix,
}

/// Graph outputs, all in token layout `(count·K) × ·`.
#[derive(Clone, Copy, Debug)]
pub struct DenoiseVars {
    pub score: Var,
    pub delta: Var,
    /// `(count·K) × 2`: real and imaginary part of `η_k`.
    pub eta: Var,
    pub h_hat: Var,
}

/// `Ĥ = H̃ + η ⊙ Δ` with `η_k` scaling column `k`.
pub fn score_step(h_tilde: &ComplexMatrix, eta: &[(f64, f64)], delta: &ComplexMatrix) -> Result<ComplexMatrix> {
    if eta.len() != h_tilde.cols() || delta.rows() != h_tilde.rows() || delta.cols() != h_tilde.cols() {
        return Err(Error::shape(
            "score step",
            &[h_tilde.rows(), h_tilde.cols()],
            &[delta.rows(), delta.cols(), eta.len()],
        ));
    }
    let mut out = h_tilde.clone();
    for t in 0..h_tilde.rows() {
        for (k, &(er, ei)) in eta.iter().enumerate() {
            let (hr, hi) = h_tilde.get(t, k);
            let (dr, di) = delta.get(t, k);
            out.set(t, k, (hr + er * dr - ei * di, hi + er * di + ei * dr));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DebertModel {
    pub config: DebertConfig,
    pub n_t: usize,
    pub store: ParamStore,
    pub embed_w: ParamId,
    pub embed_b: ParamId,
    pub w_in: ParamId,
    pub score_blocks: Vec<EncoderBlock>,
    pub denoise_block: EncoderBlock,
    pub w_score: ParamId,
    pub w_delta: ParamId,
    pub step_mlp: Mlp,
}

impl DebertModel {
    pub fn new(config: DebertConfig, n_t: usize, rng: &mut impl Rng) -> Result<Self> {
        config.block_shape().validate()?;
        if n_t == 0 || config.step_hidden == 0 {
            return Err(Error::InvalidArgument("N_T and step MLP width must be positive".into()));
        }
        let d = config.dim;
        let mut store = ParamStore::new();
        let embed_w = store.uniform("embed.weight", 1, d, 1, rng);
        let embed_b = store.uniform("embed.bias", 1, d, 1, rng);
        let w_in = store.uniform("input", 2 * n_t, d, 2 * n_t, rng);
        let score_blocks = (0..config.score_blocks)
            .map(|j| EncoderBlock::new(&mut store, &format!("score{j}"), config.block_shape(), rng))
            .collect::<Result<Vec<_>>>()?;
        let denoise_block = EncoderBlock::new(&mut store, "denoise", config.block_shape(), rng)?;
        let w_score = store.uniform("output.score", d, 2 * n_t, d, rng);
        let w_delta = store.uniform("output.delta", d, 2 * n_t, d, rng);
        let step_mlp = Mlp::new(&mut store, "output.step", &[d, config.step_hidden, 2], rng);
        Ok(Self {
            config,
            n_t,
            store,
            embed_w,
            embed_b,
            w_in,
            score_blocks,
            denoise_block,
            w_score,
            w_delta,
            step_mlp,
        })
    }

    /// `noisy` holds token rows `(count·K) × 2N_T`; `delta_e[b]` is the
    /// error standard deviation of sample `b`.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Bound,
        tokens: &Tokens,
        noisy: Var,
        delta_e: &[f64],
        mut drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<DenoiseVars> {
        if delta_e.len() != tokens.count {
            return Err(Error::InvalidArgument(format!(
                "{} error levels for {} samples",
                delta_e.len(),
                tokens.count
            )));
        }
        let [_, width] = g.shape(noisy);
        if width != 2 * self.n_t {
            return Err(Error::shape("denoiser input", &[2 * self.n_t], &[width]));
        }
        let n_t = self.n_t;
        let d = g.constant(Tensor::from_raw(delta_e.len(), 1, delta_e.to_vec()));
        let cond = g.matmul(d, p[self.embed_w])?;
        let cond = g.add(cond, p[self.embed_b])?;
        let x0 = g.matmul(noisy, p[self.w_in])?;
        let mut hs = x0;
        for blk in &self.score_blocks {
            hs = blk.forward(g, p, tokens, hs, cond, drop.as_deref_mut())?;
        }
        let score = g.matmul(hs, p[self.w_score])?;
        let combined = g.add(x0, hs)?;
        let hd = self.denoise_block.forward(g, p, tokens, combined, cond, drop.as_deref_mut())?;
        let delta = g.matmul(hd, p[self.w_delta])?;
        let eta = self.step_mlp.forward(g, p, hd, drop)?;

        let er = g.slice_cols(eta, 0, 1)?;
        let ei = g.slice_cols(eta, 1, 1)?;
        let dr = g.slice_cols(delta, 0, n_t)?;
        let di = g.slice_cols(delta, n_t, n_t)?;
        let hr = g.slice_cols(noisy, 0, n_t)?;
        let hi = g.slice_cols(noisy, n_t, n_t)?;
        let re = {
            let a = g.mul(dr, er)?;
            let b = g.mul(di, ei)?;
            let s = g.sub(a, b)?;
            g.add(hr, s)?
        };
        let im = {
            let a = g.mul(di, er)?;
            let b = g.mul(dr, ei)?;
            let s = g.add(a, b)?;
            g.add(hi, s)?
        };
        let h_hat = g.concat_cols(&[re, im])?;
        Ok(DenoiseVars { score, delta, eta, h_hat })
    }

    /// Full outputs for a batch of imperfect channels sharing one error
    /// standard deviation.
    pub fn run(&self, h_tilde: &[ComplexMatrix], delta_e: f64) -> Result<Vec<DenoiseResult>> {
        if !(delta_e >= 0.0) {
            return Err(Error::InvalidArgument(format!("error level {delta_e} must be nonnegative")));
        }
        let (t, tokens) = csi_tokens(h_tilde)?;
        let mut g = Graph::inference();
        let p = g.bind(&self.store);
        let x = g.constant(t);
        let out = self.forward(&mut g, &p, &tokens, x, &vec![delta_e; tokens.count], None)?;
        let score = tokens_to_csi(g.value(out.score), &tokens);
        let delta = tokens_to_csi(g.value(out.delta), &tokens);
        let h_hat = tokens_to_csi(g.value(out.h_hat), &tokens);
        let eta = g.value(out.eta);
        Ok((0..tokens.count)
            .map(|b| DenoiseResult {
                score: score[b].clone(),
                delta: delta[b].clone(),
                eta: (0..tokens.k).map(|i| (eta.get(b * tokens.k + i, 0), eta.get(b * tokens.k + i, 1))).collect(),
                h_hat: h_hat[b].clone(),
            })
            .collect())
    }

    pub fn forward_one(&self, h_tilde: &ComplexMatrix, delta_e: f64) -> Result<DenoiseResult> {
        Ok(self.run(std::slice::from_ref(h_tilde), delta_e)?.remove(0))
    }

    /// Refined CSI for each input, in chunks of 256.
    pub fn denoise_batch(&self, h_tilde: &[ComplexMatrix], delta_e: f64) -> Result<Vec<ComplexMatrix>> {
        let mut out = Vec::with_capacity(h_tilde.len());
        for chunk in h_tilde.chunks(256) {
            out.extend(self.run(chunk, delta_e)?.into_iter().map(|r| r.h_hat));
        }
        Ok(out)
    }
}

/// One-step score-guided refinement of `h_tilde` at error standard
/// deviation `delta_e`.
pub fn denoise(model: &DebertModel, h_tilde: &ComplexMatrix, delta_e: f64) -> Result<ComplexMatrix> {
    Ok(model.forward_one(h_tilde, delta_e)?.h_hat)
}
