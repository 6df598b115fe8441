//! Building blocks shared by the networks: dense layers, MLPs, dropout and
//! batch index helpers.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::numerics::{Activation, Bound, Graph, ParamId, ParamStore, Tensor, Var};

/// Randomness for dropout during training. `None` at evaluation.
pub struct DropoutCtx<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub rate: f64,
}

/// Inverted dropout with a freshly drawn constant mask.
pub fn dropout(g: &mut Graph, x: Var, ctx: Option<&mut DropoutCtx<'_>>) -> Result<Var> {
    let Some(ctx) = ctx else { return Ok(x) };
    if ctx.rate <= 0.0 {
        return Ok(x);
    }
    let [r, c] = g.shape(x);
    let keep = 1.0 - ctx.rate;
    let mask: Vec<f64> = (0..r * c)
        .map(|_| if ctx.rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    let m = g.constant(Tensor::from_raw(r, c, mask));
    g.mul(x, m)
}

/// Affine layer `x·W + b` with `W` stored `in×out`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = store.uniform(format!("{name}.weight"), inputs, outputs, inputs, rng);
        let bias = bias.then(|| store.uniform(format!("{name}.bias"), 1, outputs, inputs, rng));
        Self { weight, bias }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let y = g.matmul(x, p[self.weight])?;
        match self.bias {
            Some(b) => g.add(y, p[b]),
            None => Ok(y),
        }
    }
}

/// Multi-layer perceptron with LeakyReLU hidden activations and a linear
/// output layer.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `widths` lists every layer width including input and output.
    pub fn new(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut impl Rng) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], true, rng))
            .collect();
        Self { layers }
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Bound,
        x: Var,
        mut drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, p, h)?;
            if i < last {
                h = g.activation(h, Activation::leaky_relu());
                h = dropout(g, h, drop.as_deref_mut())?;
            }
        }
        Ok(h)
    }
}

/// `[0,0,..,0, 1,1,..,1, ...]`: the sample index of every row when `count`
/// samples each contribute `per` rows.
pub fn repeat_index(count: usize, per: usize) -> Arc<Vec<usize>> {
    Arc::new((0..count * per).map(|r| r / per).collect())
}
