//! Real tensor arithmetic, complex helpers, differentiation and training
//! utilities shared by every network in the crate.

pub mod checkpoint;
pub mod complex;
pub mod gradcheck;
pub mod graph;
pub mod ops;
pub mod optim;
pub mod params;
mod tensor;

pub use complex::{CVar, ComplexMatrix};
pub use gradcheck::{check_store, finite_diff_check};
pub use graph::{Bound, Gradients, Graph, Unary, Var};
pub use ops::{activation, layer_norm, matmul, softmax, Activation};
pub use optim::{AdamW, AdamWConfig};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
