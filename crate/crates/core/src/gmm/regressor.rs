use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{condition, fit_em, mixture_mean, EmConfig, GmmError, GmmParams};
use crate::trajectory::{compute_norm, DatasetKind, NormStats, Point3, SplitSpec, Trajectory, OBS_LEN, PRED_LEN};

pub const GMR_FORMAT_VERSION: u32 = 1;

/// Point-major flattening: `[x0, y0, z0, x1, ...]`.
pub fn flatten_points(points: &[Point3]) -> DVector<f64> {
    DVector::from_iterator(points.len() * 3, points.iter().flat_map(|p| p.to_array()))
}

pub fn unflatten_points(v: &DVector<f64>) -> Vec<Point3> {
    v.as_slice().chunks_exact(3).map(Point3::from_slice).collect()
}

/// A joint mixture over normalized `observed ‖ future` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GmrModel {
    pub gmm: GmmParams,
    pub norm: NormStats,
    pub dataset_kind: Option<DatasetKind>,
    pub split: Option<SplitSpec>,
}

impl GmrModel {
    /// Normalizes with statistics of `train`, flattens every trajectory to a
    /// 60-d vector and fits `k` components. Returns the EM log-likelihood
    /// history alongside the model.
    pub fn fit(train: &[Trajectory], k: usize, cfg: &EmConfig) -> Result<(GmrModel, Vec<f64>), GmmError> {
        let norm = compute_norm(train).map_err(|e| GmmError::InvalidConfig(e.to_string()))?;
        let vectors: Vec<DVector<f64>> = train.iter().map(|t| flatten_points(norm.normalize(t).points())).collect();
        let (gmm, history) = fit_em(&vectors, k, cfg)?;
        Ok((GmrModel { gmm, norm, dataset_kind: None, split: None }, history))
    }

    /// normalize → flatten → condition → mixture mean → unflatten → denormalize.
    pub fn predict(&self, observed: &[Point3]) -> Result<[Point3; PRED_LEN], GmmError> {
        if observed.len() != OBS_LEN {
            return Err(GmmError::Dimension { expected: OBS_LEN, got: observed.len() });
        }
        let normed: Vec<Point3> = observed.iter().map(|&p| self.norm.normalize_point(p)).collect();
        let cond = condition(&self.gmm, &flatten_points(&normed))?;
        let future = unflatten_points(&mixture_mean(&cond));
        let mut out = [Point3::ZERO; PRED_LEN];
        for (slot, p) in out.iter_mut().zip(future) {
            *slot = self.norm.denormalize_point(p);
        }
        if out.iter().any(|p| !p.is_finite()) {
            return Err(GmmError::NonFinite("prediction"));
        }
        Ok(out)
    }

    pub fn to_file(&self) -> GmrFile {
        GmrFile {
            format_version: GMR_FORMAT_VERSION,
            method: "gmr".into(),
            dataset_kind: self.dataset_kind,
            k: self.gmm.k(),
            dim: self.gmm.dim(),
            priors: self.gmm.priors.clone(),
            means: self.gmm.means.iter().map(|m| m.iter().copied().collect()).collect(),
            // nalgebra is column-major; transpose to write rows
            covariances: self.gmm.covariances.iter().map(|c| c.transpose().iter().copied().collect()).collect(),
            norm_stats: self.norm,
            split: self.split,
        }
    }

    pub fn from_file(f: &GmrFile) -> Result<GmrModel, GmmError> {
        if f.format_version != GMR_FORMAT_VERSION {
            return Err(GmmError::InvalidModel(format!("unsupported format_version {}", f.format_version)));
        }
        let d = f.dim;
        if f.priors.len() != f.k || f.means.len() != f.k || f.covariances.len() != f.k {
            return Err(GmmError::InvalidModel(format!("expected {} components", f.k)));
        }
        if f.means.iter().any(|m| m.len() != d) || f.covariances.iter().any(|c| c.len() != d * d) {
            return Err(GmmError::InvalidModel(format!("expected dimension {d}")));
        }
        if !f.norm_stats.is_valid() {
            return Err(GmmError::InvalidModel("invalid norm_stats".into()));
        }
        let gmm = GmmParams {
            priors: f.priors.clone(),
            means: f.means.iter().map(|m| DVector::from_row_slice(m)).collect(),
            covariances: f.covariances.iter().map(|c| DMatrix::from_row_slice(d, d, c)).collect(),
        };
        gmm.validate()?;
        Ok(GmrModel { gmm, norm: f.norm_stats, dataset_kind: f.dataset_kind, split: f.split })
    }
}

/// Serialized GMR model; covariances are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmrFile {
    pub format_version: u32,
    pub method: String,
    #[serde(default)]
    pub dataset_kind: Option<DatasetKind>,
    #[serde(rename = "K")]
    pub k: usize,
    pub dim: usize,
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
    pub norm_stats: NormStats,
    #[serde(default)]
    pub split: Option<SplitSpec>,
}
