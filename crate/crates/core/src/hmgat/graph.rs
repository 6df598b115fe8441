use crate::error::{Error, Result};
use crate::hmgat::layer::Topology;
use crate::numerics::{ComplexMatrix, Tensor};

/// Width of the CSI-derived edge feature `[Re ẽ; Im ẽ]`.
pub const EDGE_FEATURES: usize = 6;

/// Directed complete graph over users, self-loops included.
///
/// `node_x` is `K × 2N_T` with row `i = [Re h_i; Im h_i]`. `edge_e` is
/// `K² × 6` with row `i·K + j` holding `[Re ẽ_ij; Im ẽ_ij]` for
/// `ẽ_ij = [h_iᴴh_i, h_iᴴh_j, h_jᴴh_j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamGraph {
    pub k: usize,
    pub node_x: Tensor,
    pub edge_e: Tensor,
}

fn inner(a: &[(f64, f64)], b: &[(f64, f64)]) -> (f64, f64) {
    // aᴴ b
    a.iter().zip(b).fold((0.0, 0.0), |(re, im), (&(ar, ai), &(br, bi))| {
        (re + ar * br + ai * bi, im + ar * bi - ai * br)
    })
}

pub fn build_graph(h: &ComplexMatrix) -> BeamGraph {
    let (n_t, k) = (h.rows(), h.cols());
    let cols: Vec<Vec<(f64, f64)>> = (0..k).map(|c| h.column(c)).collect();
    let mut node = Vec::with_capacity(k * 2 * n_t);
    for col in &cols {
        node.extend(col.iter().map(|v| v.0));
        node.extend(col.iter().map(|v| v.1));
    }
    let gram: Vec<(f64, f64)> = (0..k * k).map(|ij| inner(&cols[ij / k], &cols[ij % k])).collect();
    let mut edge = Vec::with_capacity(k * k * EDGE_FEATURES);
    for i in 0..k {
        for j in 0..k {
            let e = [gram[i * k + i], gram[i * k + j], gram[j * k + j]];
            edge.extend(e.iter().map(|v| v.0));
            edge.extend(e.iter().map(|v| v.1));
        }
    }
    BeamGraph {
        k,
        node_x: Tensor::from_raw(k, 2 * n_t, node),
        edge_e: Tensor::from_raw(k * k, EDGE_FEATURES, edge),
    }
}

/// Disjoint union of `count` graphs with the same `K`, plus the index maps
/// the batched layers need.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub count: usize,
    pub k: usize,
    pub n_t: usize,
    /// `(count·K) × 2N_T`.
    pub node_x: Tensor,
    /// `(count·K²) × 6`.
    pub edge_e: Tensor,
    /// Per user row, the channel `h_k` as `(count·K) × N_T` real/imag parts.
    pub h_rows_re: Tensor,
    pub h_rows_im: Tensor,
    pub topo: Topology,
}

impl GraphBatch {
    pub fn new(channels: &[ComplexMatrix]) -> Result<GraphBatch> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
        let (n_t, k) = (first.rows(), first.cols());
        if let Some(bad) = channels.iter().find(|h| h.rows() != n_t || h.cols() != k) {
            return Err(Error::shape("graph batch", &[n_t, k], &[bad.rows(), bad.cols()]));
        }
        let count = channels.len();
        let mut node = Vec::with_capacity(count * k * 2 * n_t);
        let mut edge = Vec::with_capacity(count * k * k * EDGE_FEATURES);
        let mut hr = Vec::with_capacity(count * k * n_t);
        let mut hi = Vec::with_capacity(count * k * n_t);
        for h in channels {
            let g = build_graph(h);
            node.extend_from_slice(g.node_x.data());
            edge.extend_from_slice(g.edge_e.data());
            let ht = h.re().transpose();
            hr.extend_from_slice(ht.data());
            let ht = h.im().transpose();
            hi.extend_from_slice(ht.data());
        }
        Ok(GraphBatch {
            count,
            k,
            n_t,
            node_x: Tensor::from_raw(count * k, 2 * n_t, node),
            edge_e: Tensor::from_raw(count * k * k, EDGE_FEATURES, edge),
            h_rows_re: Tensor::from_raw(count * k, n_t, hr),
            h_rows_im: Tensor::from_raw(count * k, n_t, hi),
            topo: Topology::new(count, k),
        })
    }
}
