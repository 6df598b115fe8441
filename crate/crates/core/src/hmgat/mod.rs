//! Graph-attention hybrid beamforming: CSI graphs, the hybrid node/edge
//! attention network, its constrained output layer and sum-rate training.

pub mod graph;
pub mod layer;
pub mod model;
pub mod solution;
pub mod train;

pub use graph::{build_graph, BeamGraph, GraphBatch, EDGE_FEATURES};
pub use layer::{HmgalLayer, Topology};
pub use model::{constrain, hmgat_loss, user_rates, HmgatConfig, HmgatModel, PrecoderVars};
pub use solution::{
    achievable_rate, constrain_outputs, constrain_power, normalize_digital, sum_rate, ConstrainReport,
    HbfSolution, RawOutputs, EPS_C,
};
pub use train::{hmgat_step, train_hmgat, HmgatRun};
