//! Generator and discriminator networks.
//!
//! Both work on normalized positions and feed their LSTMs with embedded
//! displacements (the first displacement of a sequence is zero), so they are
//! blind to where a trajectory sits in space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GanError;
use crate::diff::{Affine, Bound, BoundLstm, DiffError, LstmParams, Mat, ParamSet, Tape, Var};
use crate::trajectory::{NormStats, Point3, Trajectory, OBS_LEN, PRED_LEN, TRAJ_LEN};

/// Layer sizes shared by generator and discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GanArch {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub pool_hidden: usize,
    pub noise_dim: usize,
    pub env_dim: usize,
}

impl Default for GanArch {
    fn default() -> Self {
        GanArch { embed_dim: 16, hidden_dim: 32, pool_hidden: 64, noise_dim: 8, env_dim: 0 }
    }
}

/// Embed → LSTM encoder → pooling perceptron → LSTM decoder → output map.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub arch: GanArch,
    pub params: ParamSet,
    pub embed: Affine,
    pub encoder: LstmParams,
    pub pool_in: Affine,
    pub pool_out: Affine,
    pub decoder: LstmParams,
    pub out: Affine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParams {
    pub arch: GanArch,
    pub params: ParamSet,
    pub embed: Affine,
    pub lstm: LstmParams,
    pub head: Affine,
}

/// Generator parameters placed on a tape.
pub struct BoundGenerator<'g> {
    g: &'g GeneratorParams,
    pub bound: Bound,
    encoder: BoundLstm,
    decoder: BoundLstm,
}

pub struct BoundDiscriminator<'d> {
    d: &'d DiscriminatorParams,
    pub bound: Bound,
    lstm: BoundLstm,
}

/// Normalized positions of a batch, one `n × 3` matrix per time step.
#[derive(Debug, Clone)]
pub struct Batch {
    pub positions: Vec<Mat>,
}

impl Batch {
    pub fn from_trajectories<'a>(trajs: impl IntoIterator<Item = &'a Trajectory>, norm: &NormStats) -> Batch {
        let trajs: Vec<&Trajectory> = trajs.into_iter().collect();
        Batch::from_points(&trajs.iter().map(|t| &t.points()[..]).collect::<Vec<_>>(), norm)
    }

    /// Every sequence in `seqs` must have the same length.
    pub fn from_points(seqs: &[&[Point3]], norm: &NormStats) -> Batch {
        let len = seqs.first().map_or(0, |s| s.len());
        let positions = (0..len)
            .map(|t| Mat::from_shape_fn((seqs.len(), 3), |(b, axis)| norm.normalize_point(seqs[b][t]).to_array()[axis]))
            .collect();
        Batch { positions }
    }

    pub fn rows(&self) -> usize {
        self.positions.first().map_or(0, Mat::nrows)
    }

    pub fn observed(&self) -> &[Mat] {
        &self.positions[..OBS_LEN]
    }

    pub fn future(&self) -> &[Mat] {
        &self.positions[OBS_LEN..]
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Batch {
        Batch { positions: self.positions.iter().map(|m| m.slice(ndarray::s![start..end, ..]).to_owned()).collect() }
    }
}

/// `[0, p1 - p0, p2 - p1, ...]` for a sequence of `n × 3` positions.
fn displacements(positions: &[Mat]) -> Vec<Mat> {
    let rows = positions.first().map_or(0, Mat::nrows);
    std::iter::once(Mat::zeros((rows, 3))).chain(positions.windows(2).map(|w| &w[1] - &w[0])).collect()
}

fn row(v: &[f64]) -> Mat {
    Mat::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector")
}

fn point_row(p: Point3) -> Mat {
    row(&p.to_array())
}

fn to_point(m: &Mat, r: usize) -> Point3 {
    Point3::new(m[[r, 0]], m[[r, 1]], m[[r, 2]])
}

impl GeneratorParams {
    pub fn new<R: Rng>(arch: GanArch, rng: &mut R) -> Self {
        let mut params = ParamSet::new();
        let embed = Affine::new(&mut params, "gen.embed", 3, arch.embed_dim, rng);
        let encoder = LstmParams::new(&mut params, "gen.encoder", arch.embed_dim, arch.hidden_dim, rng);
        let pool_width = arch.hidden_dim + arch.noise_dim + arch.env_dim;
        let pool_in = Affine::new(&mut params, "gen.pool_in", pool_width, arch.pool_hidden, rng);
        let pool_out = Affine::new(&mut params, "gen.pool_out", arch.pool_hidden, arch.hidden_dim, rng);
        let decoder = LstmParams::new(&mut params, "gen.decoder", arch.embed_dim, arch.hidden_dim, rng);
        let out = Affine::new(&mut params, "gen.out", arch.hidden_dim, 3, rng);
        GeneratorParams { arch, params, embed, encoder, pool_in, pool_out, decoder, out }
    }

    /// `trainable` decides whether backward collects gradients for these
    /// weights.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<BoundGenerator<'_>, DiffError> {
        let bound = if trainable { self.params.bind(tape)? } else { self.params.bind_frozen(tape)? };
        let encoder = self.encoder.bind(tape, &bound)?;
        let decoder = self.decoder.bind(tape, &bound)?;
        Ok(BoundGenerator { g: self, bound, encoder, decoder })
    }

    pub fn embed_point(&self, d: Point3) -> Result<Vec<f64>, GanError> {
        let mut tape = Tape::new();
        let bg = self.bind(&mut tape, false)?;
        let x = tape.constant(point_row(d))?;
        let e = bg.embed(&mut tape, x)?;
        Ok(tape.value(e).iter().copied().collect())
    }

    /// Final encoder hidden state for 10 observed points.
    pub fn encode_observed(&self, observed: &[Point3], norm: &NormStats) -> Result<Vec<f64>, GanError> {
        check_len(observed, OBS_LEN)?;
        let mut tape = Tape::new();
        let bg = self.bind(&mut tape, false)?;
        let batch = Batch::from_points(&[observed], norm);
        let h = bg.encode(&mut tape, batch.observed())?;
        Ok(tape.value(h).iter().copied().collect())
    }

    pub fn pool_context(&self, h_enc: &[f64], z: &[f64], env: &[f64]) -> Result<Vec<f64>, GanError> {
        let mut tape = Tape::new();
        let bg = self.bind(&mut tape, false)?;
        let h = tape.constant(row(h_enc))?;
        let z = tape.constant(row(z))?;
        let p = bg.pool(&mut tape, h, z, env)?;
        Ok(tape.value(p).iter().copied().collect())
    }

    /// Decodes 10 positions from pooled context `p`. The first decoder input
    /// is the last observed displacement; both points are in world units.
    pub fn decode_future(
        &self,
        p: &[f64],
        last_observed: Point3,
        last_displacement: Point3,
        norm: &NormStats,
    ) -> Result<[Point3; PRED_LEN], GanError> {
        let mut tape = Tape::new();
        let bg = self.bind(&mut tape, false)?;
        let p = tape.constant(row(p))?;
        let last = tape.constant(point_row(norm.normalize_point(last_observed)))?;
        let disp = tape.constant(point_row(norm.normalize_delta(last_displacement)))?;
        let (positions, _) = bg.decode(&mut tape, p, last, disp)?;
        Ok(collect_points(&tape, &positions, 0, norm))
    }

    pub fn generate(
        &self,
        observed: &[Point3],
        z: &[f64],
        env: &[f64],
        norm: &NormStats,
    ) -> Result<[Point3; PRED_LEN], GanError> {
        check_len(observed, OBS_LEN)?;
        let mut tape = Tape::new();
        let bg = self.bind(&mut tape, false)?;
        let batch = Batch::from_points(&[observed], norm);
        let z = tape.constant(row(z))?;
        let positions = bg.generate(&mut tape, batch.observed(), z, env)?;
        Ok(collect_points(&tape, &positions, 0, norm))
    }
}

fn check_len(points: &[Point3], want: usize) -> Result<(), GanError> {
    if points.len() != want {
        return Err(GanError::Length { expected: want, got: points.len() });
    }
    Ok(())
}

/// Denormalized row `r` of a sequence of position nodes.
pub(crate) fn collect_points(tape: &Tape, positions: &[Var], r: usize, norm: &NormStats) -> [Point3; PRED_LEN] {
    let mut out = [Point3::ZERO; PRED_LEN];
    for (slot, v) in out.iter_mut().zip(positions) {
        *slot = norm.denormalize_point(to_point(tape.value(*v), r));
    }
    out
}

impl BoundGenerator<'_> {
    pub fn embed(&self, tape: &mut Tape, disp: Var) -> Result<Var, DiffError> {
        self.g.embed.apply(tape, &self.bound, disp)
    }

    /// Runs the encoder over the embedded displacements of `observed`.
    pub fn encode(&self, tape: &mut Tape, observed: &[Mat]) -> Result<Var, DiffError> {
        let n = observed.first().map_or(0, Mat::nrows);
        let hidden = self.g.arch.hidden_dim;
        let mut h = tape.constant(Mat::zeros((n, hidden)))?;
        let mut c = tape.constant(Mat::zeros((n, hidden)))?;
        for d in displacements(observed) {
            let d = tape.constant(d)?;
            let e = self.embed(tape, d)?;
            (h, c) = self.encoder.step(tape, e, h, c)?;
        }
        Ok(h)
    }

    /// Two-layer perceptron over `h_enc ‖ z ‖ env`; `env` is shared by all rows.
    pub fn pool(&self, tape: &mut Tape, h_enc: Var, z: Var, env: &[f64]) -> Result<Var, DiffError> {
        let n = tape.value(h_enc).nrows();
        let mut parts = vec![h_enc, z];
        if !env.is_empty() {
            let e = Mat::from_shape_fn((n, env.len()), |(_, j)| env[j]);
            parts.push(tape.constant(e)?);
        }
        let input = tape.concat_cols(&parts)?;
        let hidden = self.g.pool_in.apply(tape, &self.bound, input)?;
        let hidden = tape.relu(hidden)?;
        let out = self.g.pool_out.apply(tape, &self.bound, hidden)?;
        tape.tanh(out)
    }

    /// Returns predicted positions and displacements (normalized units).
    pub fn decode(
        &self,
        tape: &mut Tape,
        p: Var,
        last_pos: Var,
        last_disp: Var,
    ) -> Result<(Vec<Var>, Vec<Var>), DiffError> {
        let n = tape.value(p).nrows();
        let mut h = p;
        let mut c = tape.constant(Mat::zeros((n, self.g.arch.hidden_dim)))?;
        let mut prev_disp = last_disp;
        let mut pos = last_pos;
        let mut positions = Vec::with_capacity(PRED_LEN);
        let mut disps = Vec::with_capacity(PRED_LEN);
        for _ in 0..PRED_LEN {
            let e = self.embed(tape, prev_disp)?;
            (h, c) = self.decoder.step(tape, e, h, c)?;
            let d = self.g.out.apply(tape, &self.bound, h)?;
            pos = tape.add(pos, d)?;
            positions.push(pos);
            disps.push(d);
            prev_disp = d;
        }
        Ok((positions, disps))
    }

    /// encode → pool → decode for normalized observed positions.
    pub fn generate(&self, tape: &mut Tape, observed: &[Mat], z: Var, env: &[f64]) -> Result<Vec<Var>, DiffError> {
        let h = self.encode(tape, observed)?;
        let p = self.pool(tape, h, z, env)?;
        let last = &observed[OBS_LEN - 1];
        let last_pos = tape.constant(last.clone())?;
        let last_disp = tape.constant(last - &observed[OBS_LEN - 2])?;
        Ok(self.decode(tape, p, last_pos, last_disp)?.0)
    }
}

impl DiscriminatorParams {
    pub fn new<R: Rng>(arch: GanArch, rng: &mut R) -> Self {
        let mut params = ParamSet::new();
        let embed = Affine::new(&mut params, "disc.embed", 3, arch.embed_dim, rng);
        let lstm = LstmParams::new(&mut params, "disc.lstm", arch.embed_dim, arch.hidden_dim, rng);
        let head = Affine::new(&mut params, "disc.head", arch.hidden_dim, 1, rng);
        DiscriminatorParams { arch, params, embed, lstm, head }
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<BoundDiscriminator<'_>, DiffError> {
        let bound = if trainable { self.params.bind(tape)? } else { self.params.bind_frozen(tape)? };
        let lstm = self.lstm.bind(tape, &bound)?;
        Ok(BoundDiscriminator { d: self, bound, lstm })
    }

    /// Raw, unbounded realism score of one 20-point trajectory.
    pub fn discriminate(&self, points: &[Point3], norm: &NormStats) -> Result<f64, GanError> {
        check_len(points, TRAJ_LEN)?;
        Ok(self.score_many(&[points], norm)?[0])
    }

    /// Scores for many trajectories in one batched pass.
    pub fn score_many(&self, seqs: &[&[Point3]], norm: &NormStats) -> Result<Vec<f64>, GanError> {
        if let Some(bad) = seqs.iter().find(|s| s.len() != TRAJ_LEN) {
            return Err(GanError::Length { expected: TRAJ_LEN, got: bad.len() });
        }
        if seqs.is_empty() {
            return Ok(Vec::new());
        }
        let batch = Batch::from_points(seqs, norm);
        let mut tape = Tape::new();
        let bd = self.bind(&mut tape, false)?;
        let positions: Vec<Var> = batch.positions.into_iter().map(|m| tape.constant(m)).collect::<Result<_, _>>()?;
        let s = bd.score(&mut tape, &positions)?;
        Ok(tape.value(s).iter().copied().collect())
    }
}

impl BoundDiscriminator<'_> {
    /// `n × 1` scores for a sequence of `n × 3` position nodes.
    pub fn score(&self, tape: &mut Tape, positions: &[Var]) -> Result<Var, DiffError> {
        let n = tape.value(positions[0]).nrows();
        let hidden = self.d.arch.hidden_dim;
        let mut h = tape.constant(Mat::zeros((n, hidden)))?;
        let mut c = tape.constant(Mat::zeros((n, hidden)))?;
        let mut prev: Option<Var> = None;
        for &p in positions {
            let d = match prev {
                None => tape.constant(Mat::zeros((n, 3)))?,
                Some(q) => tape.sub(p, q)?,
            };
            let e = self.d.embed.apply(tape, &self.bound, d)?;
            (h, c) = self.lstm.step(tape, e, h, c)?;
            prev = Some(p);
        }
        self.d.head.apply(tape, &self.bound, h)
    }
}
