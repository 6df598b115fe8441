//! Plain scalar re-implementations of the network layers, written loop by
//! loop against the layer definitions and sharing no code with the library.

#![allow(dead_code)]

pub mod checks;

use beamscore::dsn::DebertModel;
use beamscore::encoder::EncoderBlock;
use beamscore::hmgat::HmgalLayer;
use beamscore::ncsn::NcsnModel;
use beamscore::nn::Mlp;
use beamscore::numerics::{ComplexMatrix, ParamId, ParamStore, Tensor};

pub type Rows = Vec<Vec<f64>>;

const SLOPE: f64 = 0.01;
const EPS: f64 = 1e-5;

pub fn rows_of(t: &Tensor) -> Rows {
    (0..t.rows()).map(|r| (0..t.cols()).map(|c| t.get(r, c)).collect()).collect()
}

pub fn tensor_of(rows: &Rows) -> Tensor {
    let cols = rows.first().map_or(0, |r| r.len());
    Tensor::matrix(rows.len(), cols, rows.iter().flatten().copied().collect()).unwrap()
}

pub fn max_diff(a: &Rows, b: &Rows) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(u, v)| (u - v).abs())
        })
        .fold(0.0, f64::max)
}

pub fn complex_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.to_pairs()
        .iter()
        .zip(b.to_pairs())
        .map(|(x, y)| (x.0 - y.0).abs().max((x.1 - y.1).abs()))
        .fold(0.0, f64::max)
}

/// Row vector times matrix, `W` given as `in × out`.
fn apply(x: &[f64], w: &Tensor) -> Vec<f64> {
    assert_eq!(x.len(), w.rows());
    (0..w.cols()).map(|c| x.iter().enumerate().map(|(r, v)| v * w.get(r, c)).sum()).collect()
}

fn column(w: &Tensor, start: usize, len: usize) -> Vec<f64> {
    (start..start + len).map(|r| w.get(r, 0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        SLOPE * x
    }
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - top).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn layer_norm(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    v.iter().map(|x| (x - mean) / (var + EPS).sqrt()).collect()
}

/// `erf` by composite Simpson quadrature of `2/√π · e^{−t²}`.
pub fn erf_quadrature(x: f64) -> f64 {
    let n = 4000;
    let h = x / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(0.0) + f(x);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf_quadrature(x / std::f64::consts::SQRT_2))
}

/// One hybrid layer on `count` complete graphs of `k` nodes. Node row
/// `b·k + i`, edge row `(b·k + i)·k + j` for the edge from `i` to `j`.
pub fn hmgal_oracle(layer: &HmgalLayer, store: &ParamStore, x: &Rows, e: &Rows, k: usize) -> (Rows, Rows) {
    let w = |id: ParamId| store.get(id);
    let count = x.len() / k;
    let heads = layer.theta.len() as f64;
    let (f, d) = (layer.node_out, layer.edge_out);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for b in 0..count {
        let xn = |i: usize| &x[b * k + i];
        let ed = |i: usize, j: usize| &e[(b * k + i) * k + j];
        for i in 0..k {
            let mut out = apply(xn(i), w(layer.theta_r));
            for m in 0..layer.theta.len() {
                let theta = w(layer.theta[m]);
                let a = w(layer.a[m]);
                let ti = apply(xn(i), theta);
                let logits: Vec<f64> = (0..k)
                    .map(|j| {
                        let tj = apply(xn(j), theta);
                        let pe = apply(ed(i, j), w(layer.phi[m]));
                        leaky(dot(&column(a, 0, f), &ti) + dot(&column(a, f, f), &tj) + dot(&column(a, 2 * f, d), &pe))
                    })
                    .collect();
                let alpha = softmax(&logits);
                for j in 0..k {
                    let tj = apply(xn(j), theta);
                    for (o, v) in out.iter_mut().zip(tj) {
                        *o += alpha[j] * v / heads;
                    }
                }
            }
            nodes.push(out);
        }
        for i in 0..k {
            for j in 0..k {
                let pair: Vec<f64> = xn(i).iter().chain(xn(j)).copied().collect();
                let mut out = add(&apply(ed(i, j), w(layer.phi_hat_r)), &apply(&pair, w(layer.theta_n)));
                for m in 0..layer.phi_hat.len() {
                    let ph = w(layer.phi_hat[m]);
                    let bv = w(layer.b[m]);
                    let own = apply(ed(i, j), ph);
                    let tx = apply(xn(i), w(layer.theta_hat[m]));
                    let logits: Vec<f64> = (0..k)
                        .map(|n| {
                            let other = apply(ed(i, n), ph);
                            leaky(dot(&column(bv, 0, d), &own) + dot(&column(bv, d, d), &other) + dot(&column(bv, 2 * d, f), &tx))
                        })
                        .collect();
                    let beta = softmax(&logits);
                    for n in 0..k {
                        let other = apply(ed(i, n), ph);
                        for (o, v) in out.iter_mut().zip(other) {
                            *o += beta[n] * v / heads;
                        }
                    }
                }
                edges.push(out);
            }
        }
    }
    (nodes, edges)
}

/// One encoder block on the `k` tokens of a single sample.
pub fn block_oracle(blk: &EncoderBlock, store: &ParamStore, h: &Rows, cond: &[f64]) -> Rows {
    let w = |id: ParamId| store.get(id);
    let k = h.len();
    let heads = blk.w_q.len();
    let dh = blk.shape.dim / heads;
    let modulate = |h: &Rows, scale: ParamId, shift: ParamId| -> Rows {
        let s = apply(cond, w(scale));
        let t = apply(cond, w(shift));
        h.iter()
            .map(|row| layer_norm(row).iter().zip(&s).zip(&t).map(|((x, s), t)| x * s + t).collect())
            .collect()
    };
    let am = modulate(h, blk.v_scale, blk.v_shift);
    let mut cat: Rows = vec![Vec::new(); k];
    for c in 0..heads {
        let q: Rows = am.iter().map(|r| apply(r, w(blk.w_q[c]))).collect();
        let kk: Rows = am.iter().map(|r| apply(r, w(blk.w_k[c]))).collect();
        let v: Rows = am.iter().map(|r| apply(r, w(blk.w_v[c]))).collect();
        for i in 0..k {
            let logits: Vec<f64> = (0..k).map(|j| dot(&q[i], &kk[j]) / (dh as f64).sqrt()).collect();
            let attn = softmax(&logits);
            let mut o = vec![0.0; dh];
            for j in 0..k {
                for (a, b) in o.iter_mut().zip(&v[j]) {
                    *a += attn[j] * b;
                }
            }
            cat[i].extend(o);
        }
    }
    let gate = apply(cond, w(blk.v_gate));
    let h1: Rows = h
        .iter()
        .zip(&cat)
        .map(|(row, c)| {
            let mha = apply(c, w(blk.w_o));
            row.iter().zip(&mha).zip(&gate).map(|((x, m), g)| x + m * g).collect()
        })
        .collect();
    let am = modulate(&h1, blk.ffn_scale, blk.ffn_shift);
    let gate = apply(cond, w(blk.ffn_gate));
    h1.iter()
        .zip(&am)
        .map(|(row, a)| {
            let hidden: Vec<f64> = apply(a, w(blk.w1)).into_iter().map(gelu).collect();
            let ffn = apply(&hidden, w(blk.w2));
            row.iter().zip(&ffn).zip(&gate).map(|((x, y), g)| x + y * g).collect()
        })
        .collect()
}

/// Token rows `[Re h_k, Im h_k]` of one channel matrix.
pub fn tokens_of(h: &ComplexMatrix) -> Rows {
    (0..h.cols())
        .map(|c| {
            let col = h.column(c);
            col.iter().map(|v| v.0).chain(col.iter().map(|v| v.1)).collect()
        })
        .collect()
}

pub fn matrix_of(tokens: &Rows) -> ComplexMatrix {
    let n_t = tokens[0].len() / 2;
    let mut h = ComplexMatrix::zeros(n_t, tokens.len());
    for (c, row) in tokens.iter().enumerate() {
        for t in 0..n_t {
            h.set(t, c, (row[t], row[n_t + t]));
        }
    }
    h
}

pub fn ncsn_oracle(model: &NcsnModel, h: &ComplexMatrix, level: usize) -> ComplexMatrix {
    let s = &model.store;
    let table = s.get(model.embed);
    let cond: Vec<f64> = (0..table.cols()).map(|c| table.get(level, c)).collect();
    let mut x: Rows = tokens_of(h).iter().map(|r| apply(r, s.get(model.w_in))).collect();
    for blk in &model.blocks {
        x = block_oracle(blk, s, &x, &cond);
    }
    matrix_of(&x.iter().map(|r| apply(r, s.get(model.w_out))).collect())
}

fn mlp_oracle(mlp: &Mlp, store: &ParamStore, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for (i, layer) in mlp.layers.iter().enumerate() {
        h = apply(&h, store.get(layer.weight));
        if let Some(b) = layer.bias {
            h = add(&h, &rows_of(store.get(b))[0]);
        }
        if i + 1 < mlp.layers.len() {
            h = h.into_iter().map(leaky).collect();
        }
    }
    h
}

/// Score, correction direction, per-user steps and refined channel.
pub fn debert_oracle(
    model: &DebertModel,
    h: &ComplexMatrix,
    delta_e: f64,
) -> (ComplexMatrix, ComplexMatrix, Vec<(f64, f64)>, ComplexMatrix) {
    let s = &model.store;
    let cw = rows_of(s.get(model.embed_w))[0].clone();
    let cb = rows_of(s.get(model.embed_b))[0].clone();
    let cond: Vec<f64> = cw.iter().zip(&cb).map(|(w, b)| w * delta_e + b).collect();
    let x0: Rows = tokens_of(h).iter().map(|r| apply(r, s.get(model.w_in))).collect();
    let mut hs = x0.clone();
    for blk in &model.score_blocks {
        hs = block_oracle(blk, s, &hs, &cond);
    }
    let score = matrix_of(&hs.iter().map(|r| apply(r, s.get(model.w_score))).collect());
    let combined: Rows = x0.iter().zip(&hs).map(|(a, b)| add(a, b)).collect();
    let hd = block_oracle(&model.denoise_block, s, &combined, &cond);
    let delta = matrix_of(&hd.iter().map(|r| apply(r, s.get(model.w_delta))).collect());
    let eta: Vec<(f64, f64)> = hd
        .iter()
        .map(|r| {
            let o = mlp_oracle(&model.step_mlp, s, r);
            (o[0], o[1])
        })
        .collect();
    let mut refined = h.clone();
    for c in 0..h.cols() {
        let (er, ei) = eta[c];
        for t in 0..h.rows() {
            let (hr, hi) = h.get(t, c);
            let (dr, di) = delta.get(t, c);
            refined.set(t, c, (hr + er * dr - ei * di, hi + er * di + ei * dr));
        }
    }
    (score, delta, eta, refined)
}

/// `perm[k]` is the original user placed at position `k`.
pub fn permute_square(m: &ComplexMatrix, perm: &[usize]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            out.set(r, c, m.get(perm[r], perm[c]));
        }
    }
    out
}
