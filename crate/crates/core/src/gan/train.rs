use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{discriminator_loss, generator_loss};
use super::network::{Batch, DiscriminatorParams, GanArch, GeneratorParams};
use super::{GanError, GanModel};
use crate::diff::{AdamConfig, AdamState, DiffError, Mat, Tape, Var};
use crate::trajectory::{compute_norm, Trajectory, OBS_LEN};

const INIT_G_STREAM: u64 = 0;
const INIT_D_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;
pub(crate) const EVAL_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub noise_dim: usize,
    pub l2_weight: f64,
    pub adv_weight: f64,
    pub best_of_k: usize,
    pub d_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub env: Vec<f64>,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub pool_hidden: usize,
    /// Rows per gradient slice. Slices are reduced in order, so results do
    /// not depend on the thread count, but they do depend on this value.
    pub chunk_size: usize,
    pub eval_every: usize,
    /// Worker threads; 1 runs everything on the calling thread.
    #[serde(skip, default = "one")]
    pub threads: usize,
}

fn one() -> usize {
    1
}

impl Default for TrainConfig {
    fn default() -> Self {
        let arch = GanArch::default();
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            lr_g: 1e-3,
            lr_d: 1e-3,
            noise_dim: arch.noise_dim,
            l2_weight: 1.0,
            adv_weight: 1.0,
            best_of_k: 1,
            d_steps: 1,
            seed: 0,
            env: Vec::new(),
            embed_dim: arch.embed_dim,
            hidden_dim: arch.hidden_dim,
            pool_hidden: arch.pool_hidden,
            chunk_size: 32,
            eval_every: 10,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn arch(&self) -> GanArch {
        GanArch {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            pool_hidden: self.pool_hidden,
            noise_dim: self.noise_dim,
            env_dim: self.env.len(),
        }
    }

    pub fn validate(&self) -> Result<(), GanError> {
        let counts = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("noise_dim", self.noise_dim),
            ("best_of_k", self.best_of_k),
            ("d_steps", self.d_steps),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("pool_hidden", self.pool_hidden),
            ("chunk_size", self.chunk_size),
            ("eval_every", self.eval_every),
            ("threads", self.threads),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(GanError::InvalidConfig(format!("{name} must be at least 1")));
        }
        let rates = [("lr_g", self.lr_g), ("lr_d", self.lr_d)];
        if let Some((name, _)) = rates.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(GanError::InvalidConfig(format!("{name} must be positive")));
        }
        if !(self.l2_weight.is_finite() && self.l2_weight >= 0.0)
            || !(self.adv_weight.is_finite() && self.adv_weight >= 0.0)
        {
            return Err(GanError::InvalidConfig("loss weights must be finite and non-negative".into()));
        }
        if self.env.iter().any(|v| !v.is_finite()) {
            return Err(GanError::InvalidConfig("environment vector must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_adv_loss: f64,
    pub g_l2_loss: f64,
    /// Mean ADE over all 10 predicted points, on snapshot epochs only.
    pub eval_ade: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

fn noise<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Loss values and parameter gradients of one slice of a batch.
struct SliceGrads {
    losses: [f64; 3],
    grads: Vec<Mat>,
}

fn constants(tape: &mut Tape, mats: &[Mat]) -> Result<Vec<Var>, DiffError> {
    mats.iter().map(|m| tape.constant(m.clone())).collect()
}

fn d_slice(
    g: &GeneratorParams,
    d: &DiscriminatorParams,
    batch: &Batch,
    z: &Mat,
    env: &[f64],
    denom: f64,
) -> Result<SliceGrads, DiffError> {
    let mut tape = Tape::new();
    let bg = g.bind(&mut tape, false)?;
    let z = tape.constant(z.clone())?;
    let fake_future = bg.generate(&mut tape, batch.observed(), z, env)?;
    let bd = d.bind(&mut tape, true)?;
    let real = constants(&mut tape, &batch.positions)?;
    // Real rows on top of fake rows: one discriminator pass for both.
    let both: Vec<Var> = real
        .iter()
        .zip(real[..OBS_LEN].iter().chain(&fake_future))
        .map(|(&r, &f)| tape.concat_rows(&[r, f]))
        .collect::<Result<_, _>>()?;
    let scores = bd.score(&mut tape, &both)?;
    let n = batch.rows();
    let real_scores = tape.slice_rows(scores, 0, n)?;
    let fake_scores = tape.slice_rows(scores, n, 2 * n)?;
    let loss = discriminator_loss(&mut tape, real_scores, fake_scores, denom)?;
    tape.backward(loss)?;
    Ok(SliceGrads { losses: [tape.scalar(loss), 0.0, 0.0], grads: d.params.grads(&tape, &bd.bound) })
}

fn g_slice(
    g: &GeneratorParams,
    d: &DiscriminatorParams,
    batch: &Batch,
    zs: &[Mat],
    cfg: &TrainConfig,
    denom: f64,
) -> Result<SliceGrads, DiffError> {
    let mut tape = Tape::new();
    let bg = g.bind(&mut tape, true)?;
    let bd = d.bind(&mut tape, false)?;
    let positions = constants(&mut tape, &batch.positions)?;
    let (observed, truth) = positions.split_at(OBS_LEN);
    let h = bg.encode(&mut tape, batch.observed())?;
    let last_disp = tape.sub(observed[OBS_LEN - 1], observed[OBS_LEN - 2])?;
    let mut samples = Vec::with_capacity(zs.len());
    for z in zs {
        let z = tape.constant(z.clone())?;
        let p = bg.pool(&mut tape, h, z, &cfg.env)?;
        samples.push(bg.decode(&mut tape, p, observed[OBS_LEN - 1], last_disp)?.0);
    }
    let fake: Vec<Var> = observed.iter().chain(&samples[0]).copied().collect();
    let fake_scores = bd.score(&mut tape, &fake)?;
    let loss = generator_loss(&mut tape, fake_scores, &samples, truth, cfg.l2_weight, cfg.adv_weight, denom)?;
    tape.backward(loss.total)?;
    Ok(SliceGrads {
        losses: [0.0, tape.scalar(loss.adv), tape.scalar(loss.l2)],
        grads: g.params.grads(&tape, &bg.bound),
    })
}

/// Runs `f` over row slices of `rows` and sums the results in slice order.
fn reduce_slices<F>(rows: usize, chunk: usize, pool: Option<&rayon::ThreadPool>, f: F) -> Result<SliceGrads, DiffError>
where
    F: Fn(usize, usize) -> Result<SliceGrads, DiffError> + Sync,
{
    let ranges: Vec<(usize, usize)> = (0..rows).step_by(chunk).map(|s| (s, (s + chunk).min(rows))).collect();
    let parts: Vec<Result<SliceGrads, DiffError>> = match pool {
        Some(pool) => pool.install(|| ranges.par_iter().map(|&(s, e)| f(s, e)).collect()),
        None => ranges.iter().map(|&(s, e)| f(s, e)).collect(),
    };
    let mut parts = parts.into_iter();
    let mut total = parts.next().expect("at least one slice")?;
    for part in parts {
        let part = part?;
        for (t, p) in total.losses.iter_mut().zip(part.losses) {
            *t += p;
        }
        for (t, p) in total.grads.iter_mut().zip(&part.grads) {
            *t += p;
        }
    }
    Ok(total)
}

fn slice_rows(m: &Mat, s: usize, e: usize) -> Mat {
    m.slice(ndarray::s![s..e, ..]).to_owned()
}

/// Alternating adversarial training. Normalization statistics come from
/// `train_set`; `eval_set` (may be empty) feeds the periodic ADE snapshot.
pub fn train(
    train_set: &[Trajectory],
    eval_set: &[Trajectory],
    cfg: &TrainConfig,
) -> Result<(GanModel, TrainHistory), GanError> {
    cfg.validate()?;
    if train_set.len() < cfg.batch_size {
        return Err(GanError::InvalidConfig(format!(
            "{} training trajectories is fewer than batch size {}",
            train_set.len(),
            cfg.batch_size
        )));
    }
    let norm = compute_norm(train_set)?;
    let arch = cfg.arch();
    let init = |stream| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        rng
    };
    let mut g = GeneratorParams::new(arch, &mut init(INIT_G_STREAM));
    let mut d = DiscriminatorParams::new(arch, &mut init(INIT_D_STREAM));
    let mut rng = init(TRAIN_STREAM);
    let mut adam_g = AdamState::new(&g.params, AdamConfig::with_lr(cfg.lr_g));
    let mut adam_d = AdamState::new(&d.params, AdamConfig::with_lr(cfg.lr_d));
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| GanError::InvalidConfig(e.to_string()))?,
        )
    } else {
        None
    };

    let mut model = GanModel {
        generator: g.clone(),
        discriminator: d.clone(),
        norm,
        config: cfg.clone(),
        dataset_kind: None,
        split: None,
    };
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 3];
        let mut batches = 0usize;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let abort = |_: DiffError| GanError::NonFiniteLoss { epoch, batch: bi };
            let batch = Batch::from_trajectories(idx.iter().map(|&i| &train_set[i]), &norm);
            let n = batch.rows();

            for _ in 0..cfg.d_steps {
                let z = noise(n, cfg.noise_dim, &mut rng);
                let out = reduce_slices(n, cfg.chunk_size, pool.as_ref(), |s, e| {
                    d_slice(&g, &d, &batch.slice(s, e), &slice_rows(&z, s, e), &cfg.env, 2.0 * n as f64)
                })
                .map_err(abort)?;
                if !out.losses[0].is_finite() {
                    return Err(GanError::NonFiniteLoss { epoch, batch: bi });
                }
                adam_d.step(&mut d.params, &out.grads)?;
                sums[0] += out.losses[0] / cfg.d_steps as f64;
            }

            let zs: Vec<Mat> = (0..cfg.best_of_k).map(|_| noise(n, cfg.noise_dim, &mut rng)).collect();
            let out = reduce_slices(n, cfg.chunk_size, pool.as_ref(), |s, e| {
                let zs: Vec<Mat> = zs.iter().map(|z| slice_rows(z, s, e)).collect();
                g_slice(&g, &d, &batch.slice(s, e), &zs, cfg, n as f64)
            })
            .map_err(abort)?;
            if out.losses.iter().any(|l| !l.is_finite()) {
                return Err(GanError::NonFiniteLoss { epoch, batch: bi });
            }
            adam_g.step(&mut g.params, &out.grads)?;
            sums[1] += out.losses[1];
            sums[2] += out.losses[2];
            batches += 1;
        }

        let nb = batches as f64;
        let mut stats = EpochStats {
            epoch: epoch + 1,
            d_loss: sums[0] / nb,
            g_adv_loss: sums[1] / nb,
            g_l2_loss: sums[2] / nb,
            eval_ade: None,
        };
        let snapshot = (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs;
        if snapshot && !eval_set.is_empty() {
            model.generator = g.clone();
            let ade = model.mean_ade(eval_set, cfg.seed)?;
            stats.eval_ade = Some(ade);
        }
        if snapshot {
            log::info!(
                "epoch {}: d_loss {:.4} g_adv {:.4} g_l2 {:.5}{}",
                stats.epoch,
                stats.d_loss,
                stats.g_adv_loss,
                stats.g_l2_loss,
                stats.eval_ade.map(|a| format!(" eval_ade {a:.4}")).unwrap_or_default()
            );
        }
        history.epochs.push(stats);
    }
    model.generator = g;
    model.discriminator = d;
    Ok((model, history))
}
