use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::network::{collect_points, Batch, DiscriminatorParams, GeneratorParams};
use super::train::EVAL_STREAM;
use super::{GanError, TrainConfig};
use crate::diff::{Mat, ParamsFile, Tape};
use crate::trajectory::{DatasetKind, NormStats, Point3, SplitSpec, Trajectory, OBS_LEN, PRED_LEN};

pub const GAN_FORMAT_VERSION: u32 = 1;

/// Rows per inference pass.
const PREDICT_CHUNK: usize = 256;

/// A trained generator/discriminator pair with the statistics and settings
/// it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub generator: GeneratorParams,
    pub discriminator: DiscriminatorParams,
    pub norm: NormStats,
    pub config: TrainConfig,
    pub dataset_kind: Option<DatasetKind>,
    pub split: Option<SplitSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanFile {
    pub format_version: u32,
    pub method: String,
    #[serde(default)]
    pub dataset_kind: Option<DatasetKind>,
    pub generator: ParamsFile,
    pub discriminator: ParamsFile,
    pub norm_stats: NormStats,
    pub config_echo: TrainConfig,
    #[serde(default)]
    pub split: Option<SplitSpec>,
}

impl GanModel {
    /// One prediction per observed segment. Noise rows are drawn in input
    /// order from a generator seeded with `seed`, so the output depends only
    /// on the inputs and the seed.
    pub fn predict(&self, observed: &[&[Point3]], seed: u64) -> Result<Vec<[Point3; PRED_LEN]>, GanError> {
        if let Some(bad) = observed.iter().find(|o| o.len() != OBS_LEN) {
            return Err(GanError::Length { expected: OBS_LEN, got: bad.len() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(EVAL_STREAM);
        let noise_dim = self.generator.arch.noise_dim;
        let mut out = Vec::with_capacity(observed.len());
        for chunk in observed.chunks(PREDICT_CHUNK) {
            let batch = Batch::from_points(chunk, &self.norm);
            let z = Mat::from_shape_simple_fn((chunk.len(), noise_dim), || rng.sample(StandardNormal));
            let mut tape = Tape::new();
            let bg = self.generator.bind(&mut tape, false)?;
            let z = tape.constant(z)?;
            let positions = bg.generate(&mut tape, batch.observed(), z, &self.config.env)?;
            out.extend((0..chunk.len()).map(|r| collect_points(&tape, &positions, r, &self.norm)));
        }
        Ok(out)
    }

    /// Observed segments followed by generated futures.
    pub fn fake_trajectories(&self, real: &[Trajectory], seed: u64) -> Result<Vec<Trajectory>, GanError> {
        let observed: Vec<&[Point3]> = real.iter().map(Trajectory::observed).collect();
        let preds = self.predict(&observed, seed)?;
        real.iter().zip(preds).map(|(t, p)| Ok(Trajectory::join(t.observed(), &p)?)).collect()
    }

    /// Mean Euclidean error over every predicted point of `set`.
    pub fn mean_ade(&self, set: &[Trajectory], seed: u64) -> Result<f64, GanError> {
        let observed: Vec<&[Point3]> = set.iter().map(Trajectory::observed).collect();
        let preds = self.predict(&observed, seed)?;
        let total: f64 =
            set.iter().zip(&preds).flat_map(|(t, p)| t.future().iter().zip(p).map(|(a, b)| (*a - *b).norm())).sum();
        Ok(total / (set.len() * PRED_LEN).max(1) as f64)
    }

    /// Raw discriminator scores.
    pub fn score(&self, trajs: &[Trajectory]) -> Result<Vec<f64>, GanError> {
        let seqs: Vec<&[Point3]> = trajs.iter().map(|t| &t.points()[..]).collect();
        let mut out = Vec::with_capacity(seqs.len());
        for chunk in seqs.chunks(PREDICT_CHUNK) {
            out.extend(self.discriminator.score_many(chunk, &self.norm)?);
        }
        Ok(out)
    }

    pub fn to_file(&self) -> GanFile {
        GanFile {
            format_version: GAN_FORMAT_VERSION,
            method: "gan".into(),
            dataset_kind: self.dataset_kind,
            generator: self.generator.params.to_file(),
            discriminator: self.discriminator.params.to_file(),
            norm_stats: self.norm,
            config_echo: self.config.clone(),
            split: self.split,
        }
    }

    pub fn from_file(f: &GanFile) -> Result<GanModel, GanError> {
        if f.format_version != GAN_FORMAT_VERSION {
            return Err(GanError::InvalidModel(format!("unsupported format_version {}", f.format_version)));
        }
        if f.method != "gan" {
            return Err(GanError::InvalidModel(format!("method is {:?}, expected \"gan\"", f.method)));
        }
        if !f.norm_stats.is_valid() {
            return Err(GanError::InvalidModel("invalid norm_stats".into()));
        }
        let cfg = f.config_echo.clone();
        cfg.validate().map_err(|e| GanError::InvalidModel(e.to_string()))?;
        // shapes come from the echoed config, values from the file
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut generator = GeneratorParams::new(cfg.arch(), &mut rng);
        let mut discriminator = DiscriminatorParams::new(cfg.arch(), &mut rng);
        generator.params.load_file(&f.generator).map_err(|e| GanError::InvalidModel(e.to_string()))?;
        discriminator.params.load_file(&f.discriminator).map_err(|e| GanError::InvalidModel(e.to_string()))?;
        Ok(GanModel {
            generator,
            discriminator,
            norm: f.norm_stats,
            config: cfg,
            dataset_kind: f.dataset_kind,
            split: f.split,
        })
    }
}
