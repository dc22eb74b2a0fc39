//! Trajectory data model, synthetic landing generators, dataset IO and
//! normalization.
//!
//! A trajectory is always 20 positions: the first 10 are the observed
//! segment handed to a predictor, the last 10 the future segment it must
//! produce.

mod generate;
mod io;
mod norm;

pub use generate::{generate, generate_linear, generate_vertical, Direction, GenSpec};
pub use io::{parse_dataset, read_dataset, render_dataset, write_dataset};
pub use norm::{compute_norm, NormStats};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Sub};

/// Number of positions in every trajectory.
pub const TRAJ_LEN: usize = 20;
/// Index where the future segment starts.
pub const OBS_LEN: usize = 10;
/// Number of predicted positions.
pub const PRED_LEN: usize = TRAJ_LEN - OBS_LEN;

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("trajectory must have {TRAJ_LEN} points, got {0}")]
    WrongLength(usize),
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("cannot compute normalization of an empty dataset")]
    EmptyDataset,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Point3::new(v[0], v[1], v[2])
    }

    /// `(1 - t) a + t b`; exact at both ends.
    pub fn lerp(a: Point3, b: Point3, t: f64) -> Point3 {
        Point3::new((1.0 - t) * a.x + t * b.x, (1.0 - t) * a.y + t * b.y, (1.0 - t) * a.z + t * b.z)
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Twenty finite positions: `points[..10]` observed, `points[10..]` future.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: [Point3; TRAJ_LEN],
}

impl Trajectory {
    pub fn new(points: &[Point3]) -> Result<Self, TrajectoryError> {
        if points.len() != TRAJ_LEN {
            return Err(TrajectoryError::WrongLength(points.len()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(TrajectoryError::NonFinite(i));
        }
        let mut arr = [Point3::ZERO; TRAJ_LEN];
        arr.copy_from_slice(points);
        Ok(Trajectory { points: arr })
    }

    /// Joins an observed and a future segment.
    pub fn join(observed: &[Point3], future: &[Point3]) -> Result<Self, TrajectoryError> {
        let mut all = Vec::with_capacity(observed.len() + future.len());
        all.extend_from_slice(observed);
        all.extend_from_slice(future);
        Trajectory::new(&all)
    }

    pub fn points(&self) -> &[Point3; TRAJ_LEN] {
        &self.points
    }

    pub fn observed(&self) -> &[Point3] {
        &self.points[..OBS_LEN]
    }

    pub fn future(&self) -> &[Point3] {
        &self.points[OBS_LEN..]
    }

    pub fn first(&self) -> Point3 {
        self.points[0]
    }

    pub fn last(&self) -> Point3 {
        self.points[TRAJ_LEN - 1]
    }

    /// Same trajectory shifted by `offset`.
    pub fn translated(&self, offset: Point3) -> Trajectory {
        let mut points = self.points;
        for p in points.iter_mut() {
            *p = *p + offset;
        }
        Trajectory { points }
    }
}

/// Splits a trajectory into its observed and future segments.
pub fn split_obs_future(t: &Trajectory) -> ([Point3; OBS_LEN], [Point3; PRED_LEN]) {
    let mut obs = [Point3::ZERO; OBS_LEN];
    let mut fut = [Point3::ZERO; PRED_LEN];
    obs.copy_from_slice(t.observed());
    fut.copy_from_slice(t.future());
    (obs, fut)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Vertical,
    Linear,
    Real,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Vertical => "vertical",
            DatasetKind::Linear => "linear",
            DatasetKind::Real => "real",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "vertical" => Ok(DatasetKind::Vertical),
            "linear" => Ok(DatasetKind::Linear),
            "real" => Ok(DatasetKind::Real),
            other => Err(format!("unknown dataset kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub trajectories: Vec<Trajectory>,
    /// Generation seed; `None` for externally collected data.
    pub seed: Option<u64>,
    pub norm: Option<NormStats>,
}

impl Dataset {
    pub fn new(kind: DatasetKind, trajectories: Vec<Trajectory>, seed: Option<u64>) -> Self {
        Dataset { kind, trajectories, seed, norm: None }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Seeded shuffle, then the last `eval_count` trajectories (clamped to
    /// the dataset size) form the evaluation split.
    pub fn split_train_eval(&self, seed: u64, eval_count: usize) -> (Vec<Trajectory>, Vec<Trajectory>) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let n_eval = eval_count.min(self.len());
        let cut = self.len() - n_eval;
        let pick = |idx: &[usize]| idx.iter().map(|&i| self.trajectories[i].clone()).collect();
        (pick(&order[..cut]), pick(&order[cut..]))
    }
}

/// How a dataset was divided into training and evaluation trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub eval_count: usize,
}

impl SplitSpec {
    pub fn apply(&self, d: &Dataset) -> (Vec<Trajectory>, Vec<Trajectory>) {
        d.split_train_eval(self.seed, self.eval_count)
    }
}
