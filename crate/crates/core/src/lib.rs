//! Synthetic UAV landing trajectories and two predictors for them: a
//! Gaussian Mixture Regression baseline and an LSTM generative adversarial
//! network, plus the displacement and discriminator-score benchmarks used to
//! compare them.

pub mod bench;
pub mod diff;
pub mod fmt;
pub mod gan;
pub mod gmm;
pub mod trajectory;
