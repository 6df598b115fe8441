//! The full network: stacked hybrid layers, decoding MLPs, the constrained
//! output layer and the sum-rate objective, all batched over samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::hmgat::graph::{GraphBatch, EDGE_FEATURES};
use crate::hmgat::layer::{HmgalLayer, Topology};
use crate::hmgat::solution::{constrain_outputs, HbfSolution, RawOutputs, EPS_C};
use crate::nn::{DropoutCtx, Mlp};
use crate::numerics::{Activation, Bound, ComplexMatrix, Graph, ParamStore, Tensor, Unary, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmgatConfig {
    pub layers: usize,
    pub heads: usize,
    pub node_dim: usize,
    pub edge_dim: usize,
    pub mlp_hidden: usize,
    pub mlp_depth: usize,
}

impl Default for HmgatConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            heads: 4,
            node_dim: 128,
            edge_dim: 128,
            mlp_hidden: 256,
            mlp_depth: 2,
        }
    }
}

impl HmgatConfig {
    /// Narrower widths that train in minutes on one CPU core.
    pub fn desk() -> Self {
        Self {
            layers: 3,
            heads: 4,
            node_dim: 32,
            edge_dim: 32,
            mlp_hidden: 64,
            mlp_depth: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.node_dim == 0 || self.edge_dim == 0 {
            return Err(Error::InvalidArgument(format!("degenerate HMGAT config {self:?}")));
        }
        if self.mlp_depth > 0 && self.mlp_hidden == 0 {
            return Err(Error::InvalidArgument("MLP hidden width must be positive".into()));
        }
        Ok(())
    }

    fn mlp_widths(&self, input: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat(self.mlp_hidden).take(self.mlp_depth));
        w.push(output);
        w
    }
}

/// Decoder outputs on the graph. Every `(count·K)`-row tensor has row
/// `b·K + i` for user `i` of sample `b`: `p_rf_*` holds column `i` of the
/// analog precoder, `p_bb_*` holds `p_BB,i`.
#[derive(Clone, Copy, Debug)]
pub struct PrecoderVars {
    pub p_rf_re: Var,
    pub p_rf_im: Var,
    pub p_bb_re: Var,
    pub p_bb_im: Var,
    pub beta: Var,
}

/// Constrained outputs plus the effective precoders `P_RF p_BB,i` (same row
/// layout).
#[derive(Clone, Copy, Debug)]
pub struct ConstrainedVars {
    pub out: PrecoderVars,
    pub eff_re: Var,
    pub eff_im: Var,
}

#[derive(Clone, Debug)]
pub struct HmgatModel {
    pub config: HmgatConfig,
    pub n_t: usize,
    pub store: ParamStore,
    pub layers: Vec<HmgalLayer>,
    pub mlp_rf: Mlp,
    pub mlp_power: Mlp,
    pub mlp_bb: Mlp,
}

fn unit_rows(count: usize, k: usize) -> Tensor {
    let mut t = Tensor::zeros(count * k, k);
    for r in 0..count * k {
        t.set(r, r % k, 1.0);
    }
    t
}

impl HmgatModel {
    pub fn new(config: HmgatConfig, n_t: usize, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        if n_t == 0 {
            return Err(Error::InvalidArgument("N_T must be positive".into()));
        }
        let mut store = ParamStore::new();
        let (mut f, mut d) = (2 * n_t, EDGE_FEATURES);
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let name = format!("hmgal{l}");
            layers.push(HmgalLayer::new(
                &mut store,
                &name,
                f,
                d,
                config.node_dim,
                config.edge_dim,
                config.heads,
                rng,
            ));
            f = config.node_dim;
            d = config.edge_dim;
        }
        let mlp_rf = Mlp::new(&mut store, "decode.rf", &config.mlp_widths(f, 2 * n_t), rng);
        let mlp_power = Mlp::new(&mut store, "decode.power", &config.mlp_widths(f, 1), rng);
        let mlp_bb = Mlp::new(&mut store, "decode.bb", &config.mlp_widths(d, 2), rng);
        Ok(Self {
            config,
            n_t,
            store,
            layers,
            mlp_rf,
            mlp_power,
            mlp_bb,
        })
    }

    fn check_batch(&self, batch: &GraphBatch) -> Result<()> {
        if batch.n_t != self.n_t {
            return Err(Error::shape("HMGAT input", &[self.n_t], &[batch.n_t]));
        }
        Ok(())
    }

    /// Runs all hybrid layers and returns the final node and edge features.
    pub fn encode(
        &self,
        g: &mut Graph,
        p: &Bound,
        batch: &GraphBatch,
        mut drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<(Var, Var)> {
        self.check_batch(batch)?;
        let mut x = g.constant(batch.node_x.clone());
        let mut e = g.constant(batch.edge_e.clone());
        for layer in &self.layers {
            (x, e) = layer.forward(g, p, &batch.topo, x, e, drop.as_deref_mut())?;
        }
        Ok((x, e))
    }

    /// Decoding MLPs applied per node and per edge.
    pub fn decode(
        &self,
        g: &mut Graph,
        p: &Bound,
        topo: &Topology,
        x: Var,
        e: Var,
        mut drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<PrecoderVars> {
        let rows = topo.count * topo.k;
        let rf = self.mlp_rf.forward(g, p, x, drop.as_deref_mut())?;
        let beta = self.mlp_power.forward(g, p, x, drop.as_deref_mut())?;
        let bb = self.mlp_bb.forward(g, p, e, drop)?;
        let bb_re = g.slice_cols(bb, 0, 1)?;
        let bb_im = g.slice_cols(bb, 1, 1)?;
        Ok(PrecoderVars {
            p_rf_re: g.slice_cols(rf, 0, self.n_t)?,
            p_rf_im: g.slice_cols(rf, self.n_t, self.n_t)?,
            p_bb_re: g.reshape(bb_re, rows, topo.k)?,
            p_bb_im: g.reshape(bb_im, rows, topo.k)?,
            beta,
        })
    }

    /// Raw decoder outputs for a batch, converted to per-sample matrices.
    pub fn raw_outputs(&self, channels: &[ComplexMatrix]) -> Result<Vec<RawOutputs>> {
        let batch = GraphBatch::new(channels)?;
        let mut g = Graph::inference();
        let p = g.bind(&self.store);
        let (x, e) = self.encode(&mut g, &p, &batch, None)?;
        let raw = self.decode(&mut g, &p, &batch.topo, x, e, None)?;
        Ok(split_outputs(&g, &raw, batch.count, batch.k, self.n_t))
    }

    /// Feasible solutions for each channel via the plain constrained mapping.
    pub fn solve_batch(&self, channels: &[ComplexMatrix], p_max: f64) -> Result<Vec<HbfSolution>> {
        let mut out = Vec::with_capacity(channels.len());
        for chunk in channels.chunks(64) {
            for raw in self.raw_outputs(chunk)? {
                out.push(constrain_outputs(&raw, p_max)?.0);
            }
        }
        Ok(out)
    }

    pub fn solve(&self, h: &ComplexMatrix, p_max: f64) -> Result<HbfSolution> {
        Ok(self.solve_batch(std::slice::from_ref(h), p_max)?.remove(0))
    }

    /// Mean sum rate under `truth` when the network sees `observed` (or the
    /// truth itself).
    pub fn mean_sum_rate(
        &self,
        truth: &[ComplexMatrix],
        observed: Option<&[ComplexMatrix]>,
        system: &SystemConfig,
    ) -> Result<f64> {
        let inputs = observed.unwrap_or(truth);
        let sols = self.solve_batch(inputs, system.p_max)?;
        let mut it = sols.into_iter();
        let summary = crate::metrics::evaluate_sum_rates(truth, observed, system.sigma2, |_| {
            it.next().ok_or_else(|| Error::InvalidArgument("solution count".into()))
        })?;
        Ok(summary.mean)
    }

    /// Mean over the batch of `−Σ_k R_k`; the network sees `observed` and
    /// rates are measured under `truth`.
    pub fn loss(
        &self,
        g: &mut Graph,
        p: &Bound,
        observed: &GraphBatch,
        truth: &GraphBatch,
        system: &SystemConfig,
        mut drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<Var> {
        let (x, e) = self.encode(g, p, observed, drop.as_deref_mut())?;
        let raw = self.decode(g, p, &observed.topo, x, e, drop)?;
        let sol = constrain(g, &raw, &observed.topo, self.n_t, system.p_max)?;
        let rates = user_rates(g, &sol, truth, system.sigma2)?;
        let total = g.sum(rates);
        Ok(g.scale(total, -1.0 / observed.count as f64))
    }
}

/// Values of `raw` split into per-sample matrices.
pub fn split_outputs(g: &Graph, raw: &PrecoderVars, count: usize, k: usize, n_t: usize) -> Vec<RawOutputs> {
    let (rf_re, rf_im) = (g.value(raw.p_rf_re), g.value(raw.p_rf_im));
    let (bb_re, bb_im) = (g.value(raw.p_bb_re), g.value(raw.p_bb_im));
    let beta = g.value(raw.beta);
    (0..count)
        .map(|b| {
            let mut p_rf = ComplexMatrix::zeros(n_t, k);
            let mut p_bb = ComplexMatrix::zeros(k, k);
            for i in 0..k {
                let row = b * k + i;
                for t in 0..n_t {
                    p_rf.set(t, i, (rf_re.get(row, t), rf_im.get(row, t)));
                }
                for j in 0..k {
                    p_bb.set(j, i, (bb_re.get(row, j), bb_im.get(row, j)));
                }
            }
            RawOutputs {
                p_rf,
                p_bb,
                beta: (0..k).map(|i| beta.get(b * k + i, 0)).collect(),
            }
        })
        .collect()
}

fn stabilized_norm(g: &mut Graph, sq: Var) -> Var {
    let s = g.offset(sq, EPS_C * EPS_C);
    g.unary(s, Unary::Sqrt)
}

/// Differentiable constrained output layer.
pub fn constrain(
    g: &mut Graph,
    raw: &PrecoderVars,
    topo: &Topology,
    n_t: usize,
    p_max: f64,
) -> Result<ConstrainedVars> {
    let (b, k) = (topo.count, topo.k);
    let s = g.activation(raw.beta, Activation::Sigmoid);
    let per_sample = g.reshape(s, b, k)?;
    let total = g.sum_rows(per_sample);
    let denom = g.unary(total, Unary::ClampMin(1.0));
    let denom = g.gather_rows(denom, topo.node_sample.clone())?;
    let beta = g.div(s, denom)?;
    let beta = g.scale(beta, p_max);

    let mag2 = {
        let a = g.mul(raw.p_rf_re, raw.p_rf_re)?;
        let c = g.mul(raw.p_rf_im, raw.p_rf_im)?;
        g.add(a, c)?
    };
    let mag = stabilized_norm(g, mag2);
    let mag = g.scale(mag, (n_t as f64).sqrt());
    let rf_re = g.div(raw.p_rf_re, mag)?;
    let rf_im = g.div(raw.p_rf_im, mag)?;

    let complex_bmm = |g: &mut Graph, ar: Var, ai: Var, br: Var, bi: Var| -> Result<(Var, Var)> {
        let rr = g.block_matmul(ar, br, b, false)?;
        let ii = g.block_matmul(ai, bi, b, false)?;
        let ri = g.block_matmul(ar, bi, b, false)?;
        let ir = g.block_matmul(ai, br, b, false)?;
        Ok((g.sub(rr, ii)?, g.add(ri, ir)?))
    };
    let (v_re, v_im) = complex_bmm(g, raw.p_bb_re, raw.p_bb_im, rf_re, rf_im)?;
    let v2 = {
        let a = g.mul(v_re, v_re)?;
        let c = g.mul(v_im, v_im)?;
        let s = g.add(a, c)?;
        g.sum_rows(s)
    };
    let norm = stabilized_norm(g, v2);
    Ok(ConstrainedVars {
        out: PrecoderVars {
            p_rf_re: rf_re,
            p_rf_im: rf_im,
            p_bb_re: g.div(raw.p_bb_re, norm)?,
            p_bb_im: g.div(raw.p_bb_im, norm)?,
            beta,
        },
        eff_re: g.div(v_re, norm)?,
        eff_im: g.div(v_im, norm)?,
    })
}

/// Per-user rates `(count·K) × 1` under the channels of `truth`.
pub fn user_rates(g: &mut Graph, sol: &ConstrainedVars, truth: &GraphBatch, sigma2: f64) -> Result<Var> {
    let (b, k) = (truth.count, truth.k);
    let hr = g.constant(truth.h_rows_re.clone());
    let hi = g.constant(truth.h_rows_im.clone());
    // G[(b,u), j] = h_uᴴ v_j
    let rr = g.block_matmul(hr, sol.eff_re, b, true)?;
    let ii = g.block_matmul(hi, sol.eff_im, b, true)?;
    let ri = g.block_matmul(hr, sol.eff_im, b, true)?;
    let ir = g.block_matmul(hi, sol.eff_re, b, true)?;
    let g_re = g.add(rr, ii)?;
    let g_im = g.sub(ri, ir)?;
    let gain = {
        let a = g.mul(g_re, g_re)?;
        let c = g.mul(g_im, g_im)?;
        g.add(a, c)?
    };
    let beta_rows = g.reshape(sol.out.beta, b, k)?;
    let beta_rows = g.gather_rows(beta_rows, truth.topo.node_sample.clone())?;
    let power = g.mul(gain, beta_rows)?;
    let mask = g.constant(unit_rows(b, k));
    let own = g.mul(power, mask)?;
    let signal = g.sum_rows(own);
    let total = g.sum_rows(power);
    let interference = g.sub(total, signal)?;
    let denom = g.offset(interference, sigma2);
    let sinr = g.div(signal, denom)?;
    let one_plus = g.offset(sinr, 1.0);
    let ln = g.unary(one_plus, Unary::Ln);
    Ok(g.scale(ln, std::f64::consts::LOG2_E))
}

/// `−` mean batch sum rate for a fixed model, without dropout.
pub fn hmgat_loss(model: &HmgatModel, channels: &[ComplexMatrix], system: &SystemConfig) -> Result<f64> {
    let batch = GraphBatch::new(channels)?;
    let mut g = Graph::inference();
    let p = g.bind(&model.store);
    let loss = model.loss(&mut g, &p, &batch, &batch, system, None)?;
    g.value(loss).item()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_normal_matrix, sample_rng};
    use crate::hmgat::solution::sum_rate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> HmgatConfig {
        HmgatConfig {
            layers: 2,
            heads: 2,
            node_dim: 6,
            edge_dim: 5,
            mlp_hidden: 7,
            mlp_depth: 1,
        }
    }

    fn channels(n: usize, n_t: usize, k: usize, seed: u64) -> Vec<ComplexMatrix> {
        (0..n)
            .map(|i| complex_normal_matrix(&mut sample_rng(seed, i as u64), n_t, k, 1.0))
            .collect()
    }

    #[test]
    fn decoded_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = HmgatModel::new(HmgatConfig::desk(), 8, &mut rng).unwrap();
        let raw = m.raw_outputs(&channels(1, 8, 4, 1)).unwrap();
        assert_eq!((raw[0].p_rf.rows(), raw[0].p_rf.cols()), (8, 4));
        assert_eq!((raw[0].p_bb.rows(), raw[0].p_bb.cols()), (4, 4));
        assert_eq!(raw[0].beta.len(), 4);
    }

    #[test]
    fn zero_decoder_gives_zero_raw_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = HmgatModel::new(tiny(), 3, &mut rng).unwrap();
        let ids: Vec<_> = m.store.ids().filter(|&id| m.store.names()[id.index()].starts_with("decode")).collect();
        for id in ids {
            let t = m.store.get(id);
            let z = Tensor::zeros(t.rows(), t.cols());
            m.store.set(id, z).unwrap();
        }
        let raw = m.raw_outputs(&channels(2, 3, 2, 1)).unwrap();
        for r in raw {
            assert_eq!(r.p_rf, ComplexMatrix::zeros(3, 2));
            assert_eq!(r.p_bb, ComplexMatrix::zeros(2, 2));
            assert_eq!(r.beta, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn graph_loss_matches_plain_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = HmgatModel::new(tiny(), 4, &mut rng).unwrap();
        let hs = channels(3, 4, 3, 2);
        let system = SystemConfig::new(3, 4);
        let sols = m.solve_batch(&hs, system.p_max).unwrap();
        let mean: f64 =
            hs.iter().zip(&sols).map(|(h, s)| sum_rate(h, s, 1.0).unwrap()).sum::<f64>() / 3.0;
        let loss = hmgat_loss(&m, &hs, &system).unwrap();
        assert!((loss + mean).abs() < 1e-10, "{loss} vs {mean}");
    }

    #[test]
    fn duplicated_batch_has_single_sample_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = HmgatModel::new(tiny(), 4, &mut rng).unwrap();
        let h = channels(1, 4, 3, 3);
        let system = SystemConfig::new(3, 4);
        let one = hmgat_loss(&m, &h, &system).unwrap();
        let two = hmgat_loss(&m, &[h[0].clone(), h[0].clone()], &system).unwrap();
        assert!((one - two).abs() < 1e-12);
    }

    #[test]
    fn solutions_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = HmgatModel::new(tiny(), 4, &mut rng).unwrap();
        for sol in m.solve_batch(&channels(5, 4, 3, 4), 2.0).unwrap() {
            sol.check_feasible(2.0).unwrap();
        }
    }

    #[test]
    fn wrong_antenna_count_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = HmgatModel::new(tiny(), 4, &mut rng).unwrap();
        assert!(m.raw_outputs(&channels(1, 3, 2, 0)).is_err());
    }
}
