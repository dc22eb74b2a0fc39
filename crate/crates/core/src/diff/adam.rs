use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::tape::Mat;
use super::DiffError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Default::default() }
    }
}

/// Moment estimates for one parameter set.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Mat>,
    v: Vec<Mat>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let zeros: Vec<Mat> = params.values().iter().map(|p| Mat::zeros(p.dim())).collect();
        AdamState { config, m: zeros.clone(), v: zeros, step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Mat]) -> Result<(), DiffError> {
        if grads.len() != params.len() || grads.len() != self.m.len() {
            return Err(DiffError::Invalid(format!("adam: {} gradients for {} parameters", grads.len(), params.len())));
        }
        for (p, g) in params.values().iter().zip(grads) {
            if p.dim() != g.dim() {
                return Err(DiffError::Shape { op: "adam_step", left: p.dim(), right: g.dim() });
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params.values_mut().iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
        Ok(())
    }
}
