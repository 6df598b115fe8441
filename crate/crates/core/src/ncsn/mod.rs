//! Noise-conditional score network, denoising score matching and annealed
//! Langevin generation of CSI.

pub mod langevin;
pub mod loss;
pub mod model;
pub mod schedule;
pub mod train;

pub use langevin::{generate, langevin_sample, langevin_sample_batch};
pub use loss::{ncsn_loss, ncsn_loss_and_grad, ncsn_objective, Perturbations};
pub use model::{LinearScore, NcsnConfig, NcsnModel, ScoreModel};
pub use schedule::{make_schedule, NoiseSchedule, ScheduleConfig};
pub use train::{train_ncsn, ScoreRun};
