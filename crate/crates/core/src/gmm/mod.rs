//! Gaussian mixture fitted by expectation-maximization over joint
//! `observed ‖ future` vectors, and Gaussian Mixture Regression: condition
//! every component on the observed block and reweight the components by
//! how well each explains the observation.

mod condition;
mod em;
mod regressor;

pub use condition::{condition, mixture_mean, BlockView, CondMixture};
pub use em::{fit_em, log_likelihood, EmConfig};
pub use regressor::{flatten_points, unflatten_points, GmrFile, GmrModel, GMR_FORMAT_VERSION};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GmmError {
    #[error("need more samples than components (n={n}, k={k})")]
    TooFewSamples { n: usize, k: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("covariance of component {component} is not positive definite")]
    Singular { component: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Mixture weights, means and full covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub priors: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

impl GmmParams {
    pub fn k(&self) -> usize {
        self.priors.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    /// Checks the prior simplex, shapes, symmetry and positive definiteness.
    pub fn validate(&self) -> Result<(), GmmError> {
        let k = self.k();
        if k == 0 || self.means.len() != k || self.covariances.len() != k {
            return Err(GmmError::InvalidModel(format!(
                "{} priors, {} means, {} covariances",
                k,
                self.means.len(),
                self.covariances.len()
            )));
        }
        if self.priors.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(GmmError::InvalidModel("priors must be finite and non-negative".into()));
        }
        let total: f64 = self.priors.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GmmError::InvalidModel(format!("priors sum to {total}")));
        }
        let d = self.dim();
        for (c, (m, s)) in self.means.iter().zip(&self.covariances).enumerate() {
            if m.len() != d || s.shape() != (d, d) {
                return Err(GmmError::Dimension { expected: d, got: m.len().max(s.nrows()) });
            }
            if m.iter().chain(s.iter()).any(|v| !v.is_finite()) {
                return Err(GmmError::NonFinite("model parameters"));
            }
            let scale = s.amax().max(1.0);
            if (s - s.transpose()).amax() > 1e-9 * scale {
                return Err(GmmError::InvalidModel(format!("covariance {c} is not symmetric")));
            }
            Gaussian::new(m.clone(), s.clone(), c)?;
        }
        Ok(())
    }
}

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A multivariate normal with a cached Cholesky factor.
pub(crate) struct Gaussian {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl Gaussian {
    pub(crate) fn new(mean: DVector<f64>, cov: DMatrix<f64>, component: usize) -> Result<Self, GmmError> {
        let chol = Cholesky::new(cov).ok_or(GmmError::Singular { component })?;
        let l = chol.l_dirty();
        let log_det: f64 = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(GmmError::Singular { component });
        }
        let log_norm = -0.5 * (mean.len() as f64 * LN_2PI + log_det);
        Ok(Gaussian { mean, chol, log_norm })
    }

    /// Log densities of the columns of `x` (`d × n`).
    pub(crate) fn log_pdf_columns(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        let l = self.chol.l_dirty();
        let solved = l.solve_lower_triangular(&centered).expect("cholesky diagonal is positive");
        solved.column_iter().map(|c| self.log_norm - 0.5 * c.norm_squared()).collect()
    }

    pub(crate) fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let centered = x - &self.mean;
        let solved = self.chol.l_dirty().solve_lower_triangular(&centered).expect("cholesky diagonal is positive");
        self.log_norm - 0.5 * solved.norm_squared()
    }

    pub(crate) fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }
}

/// `ln Σ exp(v)`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_is_stable() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_sum_exp(&[-1e4, 0.0]) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_bad_priors_and_asymmetry() {
        let good = GmmParams {
            priors: vec![0.5, 0.5],
            means: vec![DVector::zeros(2); 2],
            covariances: vec![DMatrix::identity(2, 2); 2],
        };
        good.validate().unwrap();
        let mut bad = good.clone();
        bad.priors = vec![0.7, 0.5];
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.covariances[1][(0, 1)] = 0.3;
        assert!(bad.validate().is_err());
        let mut bad = good;
        bad.covariances[0] = DMatrix::zeros(2, 2);
        assert_eq!(bad.validate(), Err(GmmError::Singular { component: 0 }));
    }
}
