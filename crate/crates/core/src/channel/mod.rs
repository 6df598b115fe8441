//! Synthetic multipath CSI, imperfect-CSI perturbation and dataset storage.

mod config;
pub mod dataset;
pub mod synth;

pub use config::{ErrorLevel, PhysicalMetadata, SystemConfig};
pub use dataset::{read_dataset, split_dataset, write_dataset, CsiDataset, Split};
pub use synth::{complex_normal, complex_normal_matrix, perturb_csi, sample_rng, steering_vector, synth_channel};
