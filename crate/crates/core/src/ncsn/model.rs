use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{csi_tokens, tokens_to_csi, BlockShape, EncoderBlock, Tokens};
use crate::error::{Error, Result};
use crate::nn::DropoutCtx;
use crate::numerics::{Bound, ComplexMatrix, Graph, ParamId, ParamStore, Tensor, Var};

/// A network estimating the perturbed score of CSI at a given noise level.
pub trait ScoreModel {
    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    fn levels(&self) -> usize;

    /// Maps noisy token rows `(count·K) × 2N_T` to score token rows of the
    /// same shape. `levels[b]` is the 0-based level of sample `b`.
    fn score_tokens(
        &self,
        g: &mut Graph,
        p: &Bound,
        tokens: &Tokens,
        noisy: Var,
        levels: &[usize],
        drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<Var>;

    /// Scores of a batch of matrices at one level.
    fn score(&self, noisy: &[ComplexMatrix], level: usize) -> Result<Vec<ComplexMatrix>> {
        if level >= self.levels() {
            return Err(Error::InvalidArgument(format!(
                "level {level} outside 0..{}",
                self.levels()
            )));
        }
        let (t, tokens) = csi_tokens(noisy)?;
        let mut g = Graph::inference();
        let p = g.bind(self.store());
        let x = g.constant(t);
        let s = self.score_tokens(&mut g, &p, &tokens, x, &vec![level; tokens.count], None)?;
        Ok(tokens_to_csi(g.value(s), &tokens))
    }
}

pub(crate) fn check_levels(levels: &[usize], tokens: &Tokens, max: usize) -> Result<()> {
    if levels.len() != tokens.count {
        return Err(Error::InvalidArgument(format!(
            "{} levels for {} samples",
            levels.len(),
            tokens.count
        )));
    }
    if let Some(&bad) = levels.iter().find(|&&l| l >= max) {
        return Err(Error::InvalidArgument(format!("level {bad} outside 0..{max}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NcsnConfig {
    pub dim: usize,
    pub ffn: usize,
    pub heads: usize,
    pub blocks: usize,
}

impl Default for NcsnConfig {
    fn default() -> Self {
        Self { dim: 64, ffn: 256, heads: 4, blocks: 4 }
    }
}

impl NcsnConfig {
    pub fn block_shape(&self) -> BlockShape {
        BlockShape { dim: self.dim, ffn: self.ffn, heads: self.heads }
    }
}

/// Transformer score network conditioned on a learned level embedding.
#[derive(Clone, Debug)]
pub struct NcsnModel {
    pub config: NcsnConfig,
    pub n_t: usize,
    pub levels: usize,
    pub store: ParamStore,
    /// `L × D` embedding table.
    pub embed: ParamId,
    /// `2N_T × D`.
    pub w_in: ParamId,
    pub blocks: Vec<EncoderBlock>,
    /// `D × 2N_T`.
    pub w_out: ParamId,
}

impl NcsnModel {
    pub fn new(config: NcsnConfig, n_t: usize, levels: usize, rng: &mut impl Rng) -> Result<Self> {
        config.block_shape().validate()?;
        if n_t == 0 || levels == 0 {
            return Err(Error::InvalidArgument("N_T and level count must be positive".into()));
        }
        let d = config.dim;
        let mut store = ParamStore::new();
        let embed = store.uniform("embed", levels, d, 1, rng);
        let w_in = store.uniform("input", 2 * n_t, d, 2 * n_t, rng);
        let blocks = (0..config.blocks)
            .map(|j| EncoderBlock::new(&mut store, &format!("teb{j}"), config.block_shape(), rng))
            .collect::<Result<Vec<_>>>()?;
        let w_out = store.uniform("output", d, 2 * n_t, d, rng);
        Ok(Self { config, n_t, levels, store, embed, w_in, blocks, w_out })
    }
}

impl ScoreModel for NcsnModel {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn levels(&self) -> usize {
        self.levels
    }

    fn score_tokens(
        &self,
        g: &mut Graph,
        p: &Bound,
        tokens: &Tokens,
        noisy: Var,
        levels: &[usize],
        mut drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<Var> {
        check_levels(levels, tokens, self.levels)?;
        let [_, width] = g.shape(noisy);
        if width != 2 * self.n_t {
            return Err(Error::shape("score input", &[2 * self.n_t], &[width]));
        }
        let cond = g.gather_rows(p[self.embed], std::sync::Arc::new(levels.to_vec()))?;
        let mut h = g.matmul(noisy, p[self.w_in])?;
        for blk in &self.blocks {
            h = blk.forward(g, p, tokens, h, cond, drop.as_deref_mut())?;
        }
        g.matmul(h, p[self.w_out])
    }
}

/// Score model `S(H̄, l) = a_l · H̄` with one real coefficient per level.
#[derive(Clone, Debug)]
pub struct LinearScore {
    pub store: ParamStore,
    pub coef: ParamId,
    pub levels: usize,
}

impl LinearScore {
    pub fn new(levels: usize) -> Self {
        let mut store = ParamStore::new();
        let coef = store.zeros("coef", levels, 1);
        Self { store, coef, levels }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.store.get(self.coef).data().to_vec()
    }

    pub fn set_coefficients(&mut self, values: &[f64]) -> Result<()> {
        let t = Tensor::matrix(self.levels, 1, values.to_vec())?;
        self.store.set(self.coef, t)
    }
}

impl ScoreModel for LinearScore {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn levels(&self) -> usize {
        self.levels
    }

    fn score_tokens(
        &self,
        g: &mut Graph,
        p: &Bound,
        tokens: &Tokens,
        noisy: Var,
        levels: &[usize],
        _drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<Var> {
        check_levels(levels, tokens, self.levels)?;
        let per_row: Vec<usize> = tokens.sample.iter().map(|&b| levels[b]).collect();
        let a = g.gather_rows(p[self.coef], std::sync::Arc::new(per_row))?;
        g.mul(noisy, a)
    }
}
