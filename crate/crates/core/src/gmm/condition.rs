use nalgebra::{DMatrix, DVector};

use super::{log_sum_exp, Gaussian, GmmError, GmmParams};

/// A joint Gaussian split into an observed block `[0, split)` and a
/// predicted block `[split, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockView {
    pub mu_x: DVector<f64>,
    pub mu_y: DVector<f64>,
    pub s_xx: DMatrix<f64>,
    pub s_xy: DMatrix<f64>,
    pub s_yx: DMatrix<f64>,
    pub s_yy: DMatrix<f64>,
}

impl BlockView {
    pub fn new(mean: &DVector<f64>, cov: &DMatrix<f64>, split: usize) -> Self {
        let d = mean.len();
        let dy = d - split;
        BlockView {
            mu_x: mean.rows(0, split).into_owned(),
            mu_y: mean.rows(split, dy).into_owned(),
            s_xx: cov.view((0, 0), (split, split)).into_owned(),
            s_xy: cov.view((0, split), (split, dy)).into_owned(),
            s_yx: cov.view((split, 0), (dy, split)).into_owned(),
            s_yy: cov.view((split, split), (dy, dy)).into_owned(),
        }
    }
}

/// `p(y | x)` as a mixture over the predicted block.
#[derive(Debug, Clone, PartialEq)]
pub struct CondMixture {
    pub priors: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

/// Conditions every component on the leading `x_obs.len()` dimensions.
///
/// Per component: `μ_{y|x} = μ_y + Σ_yx Σ_xx⁻¹ (x − μ_x)` and
/// `Σ_{y|x} = Σ_yy − Σ_yx Σ_xx⁻¹ Σ_xy`, with `Σ_xx` solved through its
/// Cholesky factor. Component weights are the marginal densities
/// `𝒩_k(x | μ_x, Σ_xx)` normalized over components in log space.
pub fn condition(gmm: &GmmParams, x_obs: &DVector<f64>) -> Result<CondMixture, GmmError> {
    let d = gmm.dim();
    let split = x_obs.len();
    if split == 0 || split >= d {
        return Err(GmmError::Dimension { expected: d.saturating_sub(1), got: split });
    }
    if x_obs.iter().any(|v| !v.is_finite()) {
        return Err(GmmError::NonFinite("observed vector"));
    }
    let k = gmm.k();
    let mut log_w = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    for c in 0..k {
        let b = BlockView::new(&gmm.means[c], &gmm.covariances[c], split);
        let marginal = Gaussian::new(b.mu_x.clone(), b.s_xx.clone(), c)?;
        let resid = DMatrix::from_column_slice(split, 1, (x_obs - &b.mu_x).as_slice());
        let a = marginal.solve(&resid);
        means.push(&b.mu_y + &b.s_yx * a.column(0));
        let gain = marginal.solve(&b.s_xy);
        let cov = &b.s_yy - &b.s_yx * gain;
        covariances.push((&cov + cov.transpose()) * 0.5);
        log_w.push(marginal.log_pdf(x_obs));
    }
    let lse = log_sum_exp(&log_w);
    let priors = if lse.is_finite() {
        log_w.iter().map(|w| (w - lse).exp()).collect()
    } else {
        log::warn!("every component density underflowed at this observation; using uniform weights");
        vec![1.0 / k as f64; k]
    };
    Ok(CondMixture { priors, means, covariances })
}

/// Expected value of the conditional mixture, `Σ_k π_k μ_k`.
pub fn mixture_mean(c: &CondMixture) -> DVector<f64> {
    let dim = c.means.first().map_or(0, |m| m.len());
    c.priors.iter().zip(&c.means).fold(DVector::zeros(dim), |acc, (p, m)| acc + m * *p)
}
