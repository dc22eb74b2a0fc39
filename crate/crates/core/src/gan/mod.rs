//! LSTM encoder-decoder generator conditioned on noise, an LSTM
//! discriminator over full trajectories, and their alternating training.

mod loss;
mod model;
mod network;
mod train;

pub use loss::{discriminator_loss, gan_losses, generator_loss, variety_l2, GenLoss};
pub use model::{GanFile, GanModel, GAN_FORMAT_VERSION};
pub use network::{Batch, BoundDiscriminator, BoundGenerator, DiscriminatorParams, GanArch, GeneratorParams};
pub use train::{train, EpochStats, TrainConfig, TrainHistory};

use crate::diff::DiffError;
use crate::trajectory::TrajectoryError;

#[derive(Debug, thiserror::Error)]
pub enum GanError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Data(#[from] TrajectoryError),
    #[error("expected {expected} points, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
