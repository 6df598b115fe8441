//! Hybrid beamforming with graph attention, score-based CSI generation and
//! score-based CSI denoising.

pub mod baselines;
pub mod channel;
pub mod cli;
pub mod dsn;
pub mod encoder;
pub mod error;
pub mod hmgat;
pub mod metrics;
pub mod ncsn;
pub mod nn;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
