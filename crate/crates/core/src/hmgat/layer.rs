//! One hybrid message-passing layer: attention over neighbouring nodes and
//! over edges sharing a source node, both computed from the same input
//! snapshot.

use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::nn::{dropout, repeat_index, DropoutCtx};
use crate::numerics::{Activation, Bound, Graph, ParamId, ParamStore, Var};

/// Parameters of one layer. Weight matrices are stored `in×out`, so the
/// transform `Θx` of a column vector becomes `x·W` on feature rows.
#[derive(Clone, Debug)]
pub struct HmgalLayer {
    pub node_in: usize,
    pub edge_in: usize,
    pub node_out: usize,
    pub edge_out: usize,
    pub theta: Vec<ParamId>,
    pub theta_r: ParamId,
    pub phi: Vec<ParamId>,
    /// `(2F + D) × 1` per head.
    pub a: Vec<ParamId>,
    pub phi_hat: Vec<ParamId>,
    pub phi_hat_r: ParamId,
    /// `2F_in × D_out`.
    pub theta_n: ParamId,
    pub theta_hat: Vec<ParamId>,
    /// `(2D + F) × 1` per head.
    pub b: Vec<ParamId>,
}

/// Index maps describing a batch of `count` complete graphs on `k` nodes.
#[derive(Clone, Debug)]
pub struct Topology {
    pub count: usize,
    pub k: usize,
    pub node_sample: Arc<Vec<usize>>,
    pub edge_src: Arc<Vec<usize>>,
    pub edge_dst: Arc<Vec<usize>>,
}

impl Topology {
    pub fn new(count: usize, k: usize) -> Topology {
        Topology {
            count,
            k,
            node_sample: repeat_index(count, k),
            edge_src: repeat_index(count * k, k),
            edge_dst: Arc::new((0..count * k * k).map(|e| (e / (k * k)) * k + e % k).collect()),
        }
    }
}

impl HmgalLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        node_in: usize,
        edge_in: usize,
        node_out: usize,
        edge_out: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut per_head = |store: &mut ParamStore, what: &str, rows: usize, cols: usize| -> Vec<ParamId> {
            (0..heads)
                .map(|m| store.uniform(format!("{name}.{what}{m}"), rows, cols, rows, &mut *rng))
                .collect()
        };
        let theta = per_head(store, "node.theta", node_in, node_out);
        let phi = per_head(store, "node.phi", edge_in, edge_out);
        let a = per_head(store, "node.a", 2 * node_out + edge_out, 1);
        let phi_hat = per_head(store, "edge.phi", edge_in, edge_out);
        let theta_hat = per_head(store, "edge.theta", node_in, node_out);
        let b = per_head(store, "edge.b", 2 * edge_out + node_out, 1);
        let theta_r = store.uniform(format!("{name}.node.residual"), node_in, node_out, node_in, rng);
        let phi_hat_r = store.uniform(format!("{name}.edge.residual"), edge_in, edge_out, edge_in, rng);
        let theta_n = store.uniform(format!("{name}.edge.incident"), 2 * node_in, edge_out, 2 * node_in, rng);
        Self {
            node_in,
            edge_in,
            node_out,
            edge_out,
            theta,
            theta_r,
            phi,
            a,
            phi_hat,
            phi_hat_r,
            theta_n,
            theta_hat,
            b,
        }
    }

    pub fn heads(&self) -> usize {
        self.theta.len()
    }

    /// Node update on `(count·K) × F_in` features `x` and `(count·K²) × D_in`
    /// edge features `e`.
    pub fn node_update(
        &self,
        g: &mut Graph,
        p: &Bound,
        topo: &Topology,
        x: Var,
        e: Var,
        mut drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<Var> {
        let (b, k, f) = (topo.count, topo.k, self.node_out);
        let mut total: Option<Var> = None;
        for m in 0..self.heads() {
            let tx = g.matmul(x, p[self.theta[m]])?;
            let te = g.matmul(e, p[self.phi[m]])?;
            let a = p[self.a[m]];
            let a_self = g.slice_rows(a, 0, f)?;
            let a_nbr = g.slice_rows(a, f, f)?;
            let a_edge = g.slice_rows(a, 2 * f, self.edge_out)?;
            let s_self = g.matmul(tx, a_self)?;
            let s_nbr = g.matmul(tx, a_nbr)?;
            let s_nbr = g.reshape(s_nbr, b, k)?;
            let s_nbr = g.gather_rows(s_nbr, topo.node_sample.clone())?;
            let s_edge = g.matmul(te, a_edge)?;
            let s_edge = g.reshape(s_edge, b * k, k)?;
            let scores = g.add(s_edge, s_nbr)?;
            let scores = g.add(scores, s_self)?;
            let scores = g.activation(scores, Activation::leaky_relu());
            let alpha = g.softmax_rows(scores);
            let alpha = dropout(g, alpha, drop.as_deref_mut())?;
            let agg = g.block_matmul(alpha, tx, b, false)?;
            total = Some(match total {
                Some(t) => g.add(t, agg)?,
                None => agg,
            });
        }
        let mean = g.scale(total.expect("at least one head"), 1.0 / self.heads() as f64);
        let res = g.matmul(x, p[self.theta_r])?;
        g.add(mean, res)
    }

    /// Edge update; consumes the same pre-update `x` as [`Self::node_update`].
    pub fn edge_update(
        &self,
        g: &mut Graph,
        p: &Bound,
        topo: &Topology,
        x: Var,
        e: Var,
        mut drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<Var> {
        let (b, k, d) = (topo.count, topo.k, self.edge_out);
        let mut total: Option<Var> = None;
        for m in 0..self.heads() {
            let te = g.matmul(e, p[self.phi_hat[m]])?;
            let tx = g.matmul(x, p[self.theta_hat[m]])?;
            let bv = p[self.b[m]];
            let b_self = g.slice_rows(bv, 0, d)?;
            let b_nbr = g.slice_rows(bv, d, d)?;
            let b_node = g.slice_rows(bv, 2 * d, self.node_out)?;
            let s_self = g.matmul(te, b_self)?;
            let s_nbr = g.matmul(te, b_nbr)?;
            let s_nbr = g.reshape(s_nbr, b * k, k)?;
            let s_nbr = g.gather_rows(s_nbr, topo.edge_src.clone())?;
            let s_node = g.matmul(tx, b_node)?;
            let s_node = g.gather_rows(s_node, topo.edge_src.clone())?;
            let scores = g.add(s_nbr, s_self)?;
            let scores = g.add(scores, s_node)?;
            let scores = g.activation(scores, Activation::leaky_relu());
            let beta = g.softmax_rows(scores);
            let beta = dropout(g, beta, drop.as_deref_mut())?;
            let agg = g.block_matmul(beta, te, b * k, false)?;
            total = Some(match total {
                Some(t) => g.add(t, agg)?,
                None => agg,
            });
        }
        let mean = g.scale(total.expect("at least one head"), 1.0 / self.heads() as f64);
        let res = g.matmul(e, p[self.phi_hat_r])?;
        let xs = g.gather_rows(x, topo.edge_src.clone())?;
        let xd = g.gather_rows(x, topo.edge_dst.clone())?;
        let pair = g.concat_cols(&[xs, xd])?;
        let inc = g.matmul(pair, p[self.theta_n])?;
        let out = g.add(mean, res)?;
        g.add(out, inc)
    }

    /// Both updates from the same snapshot.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Bound,
        topo: &Topology,
        x: Var,
        e: Var,
        mut drop: Option<&mut DropoutCtx<'_>>,
    ) -> Result<(Var, Var)> {
        let x_new = self.node_update(g, p, topo, x, e, drop.as_deref_mut())?;
        let e_new = self.edge_update(g, p, topo, x, e, drop)?;
        Ok((x_new, e_new))
    }
}
