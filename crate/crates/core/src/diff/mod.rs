//! Small reverse-mode differentiation core: a recording tape over 2-D
//! matrices, dense affine maps, an LSTM cell, and the Adam optimizer.

mod adam;
mod lstm;
mod params;
mod tape;

#[cfg(test)]
pub(crate) mod gradcheck;

pub use adam::{AdamConfig, AdamState};
pub use lstm::{lstm_step, BoundLstm, LstmParams};
pub use params::{uniform, Affine, Bound, ParamId, ParamSet, ParamsFile, TensorFile, PARAMS_FORMAT_VERSION};
pub use tape::{bce_logit, logistic, Mat, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    Shape { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward called before any forward computation")]
    NoForward,
    #[error("loss must be a 1x1 scalar, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("backward already ran on this tape; reset gradients first")]
    AlreadyBackward,
    #[error("{0}")]
    Invalid(String),
}
