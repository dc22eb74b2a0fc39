use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, Gaussian, GmmError, GmmParams};

/// Responsibility mass below which a component is considered dead.
const DEAD_COMPONENT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once the mean per-sample log-likelihood gains less than this.
    pub ll_tolerance: f64,
    /// Added to every covariance diagonal.
    pub cov_regularization: f64,
    pub n_restarts: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { max_iters: 200, ll_tolerance: 1e-7, cov_regularization: 1e-6, n_restarts: 5, seed: 0 }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<(), GmmError> {
        if self.max_iters == 0 || self.n_restarts == 0 {
            return Err(GmmError::InvalidConfig("max_iters and n_restarts must be at least 1".into()));
        }
        if !(self.cov_regularization >= 0.0 && self.cov_regularization.is_finite()) {
            return Err(GmmError::InvalidConfig("cov_regularization must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Total log-likelihood `Σₙ ln Σₖ πₖ 𝒩(xₙ | μₖ, Σₖ)`.
pub fn log_likelihood(gmm: &GmmParams, vectors: &[DVector<f64>]) -> Result<f64, GmmError> {
    let x = stack(vectors, gmm.dim())?;
    Ok(e_step(gmm, &x)?.0)
}

fn stack(vectors: &[DVector<f64>], dim: usize) -> Result<DMatrix<f64>, GmmError> {
    if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
        return Err(GmmError::Dimension { expected: dim, got: bad.len() });
    }
    if vectors.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(GmmError::NonFinite("input vectors"));
    }
    Ok(DMatrix::from_columns(vectors))
}

/// Returns the total log-likelihood and the `n × k` responsibilities.
fn e_step(gmm: &GmmParams, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>), GmmError> {
    let n = x.ncols();
    let k = gmm.k();
    let mut log_p = DMatrix::zeros(n, k);
    for c in 0..k {
        let g = Gaussian::new(gmm.means[c].clone(), gmm.covariances[c].clone(), c)?;
        let ln_prior = gmm.priors[c].ln();
        for (i, lp) in g.log_pdf_columns(x).into_iter().enumerate() {
            log_p[(i, c)] = ln_prior + lp;
        }
    }
    let mut total = 0.0;
    let mut row = vec![0.0; k];
    for i in 0..n {
        for (c, r) in row.iter_mut().enumerate() {
            *r = log_p[(i, c)];
        }
        let lse = log_sum_exp(&row);
        total += lse;
        for c in 0..k {
            log_p[(i, c)] = (log_p[(i, c)] - lse).exp();
        }
    }
    if !total.is_finite() {
        return Err(GmmError::NonFinite("log-likelihood"));
    }
    Ok((total, log_p))
}

fn sample_covariance(x: &DMatrix<f64>, weights: Option<&[f64]>, mean: &DVector<f64>, reg: f64) -> DMatrix<f64> {
    let d = x.nrows();
    let mut centered = x.clone();
    let mut total = 0.0;
    for (i, mut col) in centered.column_iter_mut().enumerate() {
        col -= mean;
        let w = weights.map_or(1.0, |w| w[i]);
        col *= w.sqrt();
        total += w;
    }
    let mut cov = &centered * centered.transpose() / total;
    cov = (&cov + cov.transpose()) * 0.5;
    for i in 0..d {
        cov[(i, i)] += reg;
    }
    cov
}

/// k-means++ seeding: first centre uniform, then proportional to the squared
/// distance to the nearest chosen centre.
fn kmeans_pp<R: Rng>(x: &DMatrix<f64>, k: usize, rng: &mut R) -> Vec<DVector<f64>> {
    let n = x.ncols();
    let mut centres = vec![x.column(rng.random_range(0..n)).into_owned()];
    let mut d2: Vec<f64> = x.column_iter().map(|c| (c - &centres[0]).norm_squared()).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = x.column(pick).into_owned();
        for (i, col) in x.column_iter().enumerate() {
            d2[i] = d2[i].min((col - &c).norm_squared());
        }
        centres.push(c);
    }
    centres
}

struct Run {
    params: GmmParams,
    history: Vec<f64>,
}

fn fit_once(x: &DMatrix<f64>, k: usize, cfg: &EmConfig, restart: usize) -> Result<Run, GmmError> {
    let (d, n) = x.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let reg = cfg.cov_regularization;

    let global_mean = x.column_mean();
    let global_cov = sample_covariance(x, None, &global_mean, reg);
    let mut params = GmmParams {
        priors: vec![1.0 / k as f64; k],
        means: kmeans_pp(x, k, &mut rng),
        covariances: vec![global_cov.clone(); k],
    };

    let (mut ll, mut resp) = e_step(&params, x)?;
    let mut history = vec![ll];
    for _ in 0..cfg.max_iters {
        let previous = params.clone();
        for c in 0..k {
            let w: Vec<f64> = resp.column(c).iter().copied().collect();
            let mass: f64 = w.iter().sum();
            if mass < DEAD_COMPONENT {
                let i = rng.random_range(0..n);
                log::warn!("EM component {c} lost all responsibility; re-seeding from sample {i}");
                params.means[c] = x.column(i).into_owned();
                params.covariances[c] = global_cov.clone();
                params.priors[c] = 1.0 / k as f64;
                continue;
            }
            let mean = x * DVector::from_vec(w.clone()) / mass;
            params.covariances[c] = sample_covariance(x, Some(&w), &mean, reg);
            params.means[c] = mean;
            params.priors[c] = mass / n as f64;
        }
        let total: f64 = params.priors.iter().sum();
        params.priors.iter_mut().for_each(|p| *p /= total);

        let (next, next_resp) = e_step(&params, x)?;
        // The diagonal ridge makes each update only approximately an EM step,
        // so the likelihood can dip near convergence. Keep the better iterate.
        if next < ll {
            params = previous;
            break;
        }
        history.push(next);
        let gain = (next - ll) / n as f64;
        ll = next;
        resp = next_resp;
        if gain < cfg.ll_tolerance {
            break;
        }
    }
    debug_assert_eq!(params.dim(), d);
    Ok(Run { params, history })
}

/// Fits a `k`-component full-covariance mixture. Runs `n_restarts`
/// independently seeded fits and keeps the one with the highest final
/// log-likelihood (earliest restart on ties). The returned history holds the
/// log-likelihood of the initial parameters and after every accepted
/// iteration; an update that would lower it ends the fit and is discarded,
/// so the history never decreases and its last entry belongs to the result.
pub fn fit_em(vectors: &[DVector<f64>], k: usize, cfg: &EmConfig) -> Result<(GmmParams, Vec<f64>), GmmError> {
    cfg.validate()?;
    let n = vectors.len();
    if k == 0 || n <= k {
        return Err(GmmError::TooFewSamples { n, k });
    }
    let x = stack(vectors, vectors[0].len())?;
    let mut best: Option<Run> = None;
    for restart in 0..cfg.n_restarts {
        let run = fit_once(&x, k, cfg, restart)?;
        let better =
            best.as_ref().is_none_or(|b| run.history.last().expect("non-empty") > b.history.last().expect("non-empty"));
        if better {
            best = Some(run);
        }
    }
    let run = best.expect("n_restarts >= 1");
    Ok((run.params, run.history))
}
