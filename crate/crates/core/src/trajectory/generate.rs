use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetKind, Point3, Trajectory, TrajectoryError, TRAJ_LEN};

/// Approach direction, numbered 1..=4 in the order of `GenSpec::direction_means`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Direction(pub u8);

/// Parameters of a synthetic landing dataset.
///
/// The sigmas are standard deviations of the initial position, per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub direction_means: [Point3; 4],
    pub xy_sigma: f64,
    pub z_sigma: f64,
    pub destination: Point3,
}

impl GenSpec {
    pub fn vertical() -> Self {
        GenSpec {
            direction_means: [
                Point3::new(-200.0, 200.0, 75.0),
                Point3::new(200.0, -200.0, 75.0),
                Point3::new(-200.0, -200.0, 75.0),
                Point3::new(200.0, 200.0, 75.0),
            ],
            xy_sigma: 50.0,
            z_sigma: 3.5,
            destination: Point3::ZERO,
        }
    }

    pub fn linear() -> Self {
        GenSpec {
            direction_means: [
                Point3::new(-400.0, 400.0, 140.0),
                Point3::new(400.0, -400.0, 140.0),
                Point3::new(-400.0, -400.0, 140.0),
                Point3::new(400.0, 400.0, 140.0),
            ],
            xy_sigma: 100.0,
            z_sigma: 7.5,
            destination: Point3::ZERO,
        }
    }

    pub fn default_for(kind: DatasetKind) -> Option<Self> {
        match kind {
            DatasetKind::Vertical => Some(Self::vertical()),
            DatasetKind::Linear => Some(Self::linear()),
            DatasetKind::Real => None,
        }
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let positive = |s: f64| s.is_finite() && s > 0.0;
        if !positive(self.xy_sigma) || !positive(self.z_sigma) {
            return Err(TrajectoryError::InvalidSpec(format!(
                "sigmas must be positive and finite (xy_sigma={}, z_sigma={})",
                self.xy_sigma, self.z_sigma
            )));
        }
        if !self.destination.is_finite() || self.direction_means.iter().any(|m| !m.is_finite()) {
            return Err(TrajectoryError::InvalidSpec("non-finite mean or destination".into()));
        }
        Ok(())
    }
}

/// Horizontal cruise at the initial altitude to the point above the
/// destination, then a vertical descent.
pub fn generate_vertical(n: usize, seed: u64, spec: &GenSpec) -> Result<Dataset, TrajectoryError> {
    generate(DatasetKind::Vertical, n, seed, spec).map(|(d, _)| d)
}

/// Straight chord from the initial point to the destination.
pub fn generate_linear(n: usize, seed: u64, spec: &GenSpec) -> Result<Dataset, TrajectoryError> {
    generate(DatasetKind::Linear, n, seed, spec).map(|(d, _)| d)
}

/// Generates `n` trajectories of a synthetic kind and returns the direction
/// each one was drawn from.
///
/// Trajectory `i` uses its own ChaCha stream `(seed, i)`, so any subset can
/// be regenerated independently of the others.
pub fn generate(
    kind: DatasetKind,
    n: usize,
    seed: u64,
    spec: &GenSpec,
) -> Result<(Dataset, Vec<Direction>), TrajectoryError> {
    spec.validate()?;
    let path: fn(Point3, Point3) -> [Point3; TRAJ_LEN] = match kind {
        DatasetKind::Vertical => vertical_path,
        DatasetKind::Linear => linear_path,
        DatasetKind::Real => {
            return Err(TrajectoryError::InvalidSpec("real data cannot be generated".into()));
        }
    };
    let mut trajectories = Vec::with_capacity(n);
    let mut directions = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let dir = rng.random_range(0..4usize);
        let mean = spec.direction_means[dir];
        let start = Point3::new(
            mean.x + spec.xy_sigma * rng.sample::<f64, _>(StandardNormal),
            mean.y + spec.xy_sigma * rng.sample::<f64, _>(StandardNormal),
            mean.z + spec.z_sigma * rng.sample::<f64, _>(StandardNormal),
        );
        trajectories.push(Trajectory::new(&path(start, spec.destination))?);
        directions.push(Direction(dir as u8 + 1));
    }
    Ok((Dataset::new(kind, trajectories, Some(seed)), directions))
}

fn linear_path(start: Point3, dest: Point3) -> [Point3; TRAJ_LEN] {
    let mut pts = [Point3::ZERO; TRAJ_LEN];
    let last = (TRAJ_LEN - 1) as f64;
    for (k, p) in pts.iter_mut().enumerate() {
        *p = Point3::lerp(start, dest, k as f64 / last);
    }
    pts
}

/// The 19 intervals between the 20 points are shared between the two legs in
/// proportion to their lengths, with at least one interval per leg. The
/// corner point belongs to both legs.
fn vertical_path(start: Point3, dest: Point3) -> [Point3; TRAJ_LEN] {
    let corner = Point3::new(dest.x, dest.y, start.z);
    let horizontal = (corner - start).norm();
    let vertical = (dest - corner).norm();
    let intervals = TRAJ_LEN - 1;
    let total = horizontal + vertical;
    let h_steps = if total > 0.0 {
        ((intervals as f64 * horizontal / total).round() as usize).clamp(1, intervals - 1)
    } else {
        1
    };
    let v_steps = intervals - h_steps;

    let mut pts = [Point3::ZERO; TRAJ_LEN];
    for (k, p) in pts.iter_mut().enumerate() {
        *p = if k <= h_steps {
            Point3::lerp(start, corner, k as f64 / h_steps as f64)
        } else {
            Point3::lerp(corner, dest, (k - h_steps) as f64 / v_steps as f64)
        };
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_mean(ds: &Dataset, dirs: &[Direction], want: Direction) -> (Point3, usize) {
        let firsts: Vec<Point3> =
            ds.trajectories.iter().zip(dirs).filter(|(_, d)| **d == want).map(|(t, _)| t.first()).collect();
        let n = firsts.len();
        let sum = firsts.iter().fold(Point3::ZERO, |a, &b| a + b);
        (sum * (1.0 / n as f64), n)
    }

    #[test]
    fn vertical_default_shape_and_endpoint() {
        let ds = generate_vertical(3000, 42, &GenSpec::vertical()).unwrap();
        assert_eq!(ds.len(), 3000);
        assert_eq!(ds.kind, DatasetKind::Vertical);
        for t in &ds.trajectories {
            assert_eq!(t.points().len(), 20);
            assert_eq!(t.last(), Point3::ZERO);
        }
    }

    #[test]
    fn empty_request_gives_empty_dataset() {
        let ds = generate_vertical(0, 1, &GenSpec::vertical()).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.kind, DatasetKind::Vertical);
    }

    #[test]
    fn rejects_non_positive_sigma() {
        let mut spec = GenSpec::vertical();
        spec.z_sigma = 0.0;
        assert!(matches!(generate_vertical(5, 0, &spec), Err(TrajectoryError::InvalidSpec(_))));
        let mut spec = GenSpec::linear();
        spec.xy_sigma = -1.0;
        assert!(generate_linear(5, 0, &spec).is_err());
    }

    #[test]
    fn vertical_direction_means_converge() {
        let spec = GenSpec::vertical();
        let (ds, dirs) = generate(DatasetKind::Vertical, 10_000, 9, &spec).unwrap();
        let (mean, n) = sample_mean(&ds, &dirs, Direction(1));
        let bound = |s: f64| 3.0 * s / (n as f64).sqrt();
        assert!((mean.x + 200.0).abs() < bound(50.0), "{mean}");
        assert!((mean.y - 200.0).abs() < bound(50.0), "{mean}");
        assert!((mean.z - 75.0).abs() < bound(3.5), "{mean}");
    }

    #[test]
    fn linear_direction_three_mean_converges() {
        let spec = GenSpec::linear();
        let (ds, dirs) = generate(DatasetKind::Linear, 5000, 11, &spec).unwrap();
        let (mean, n) = sample_mean(&ds, &dirs, Direction(3));
        let bound = |s: f64| 3.0 * s / (n as f64).sqrt();
        assert!((mean.x + 400.0).abs() < bound(100.0));
        assert!((mean.y + 400.0).abs() < bound(100.0));
        assert!((mean.z - 140.0).abs() < bound(7.5));
    }

    #[test]
    fn linear_points_are_uniform_on_chord() {
        let ds = generate_linear(1, 7, &GenSpec::linear()).unwrap();
        let t = &ds.trajectories[0];
        let (a, b) = (t.first(), Point3::ZERO);
        for (k, p) in t.points().iter().enumerate() {
            let expect = a + (b - a) * (k as f64 / 19.0);
            assert!((*p - expect).norm() <= 1e-9 * a.norm());
            // parallel to (initial - destination)
            let (u, v) = (*p - b, a - b);
            let cross = Point3::new(u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x);
            assert!(cross.norm() <= 1e-9 * u.norm().max(1.0) * v.norm());
        }
    }

    #[test]
    fn vertical_legs_are_axis_aligned() {
        let ds = generate_vertical(500, 3, &GenSpec::vertical()).unwrap();
        for t in &ds.trajectories {
            let p = t.points();
            let z0 = p[0].z;
            // horizontal leg: points whose xy still moves
            let corner = p.iter().position(|q| q.x.abs() < 1e-9 && q.y.abs() < 1e-9).unwrap();
            assert!((1..=18).contains(&corner));
            for q in &p[..=corner] {
                assert!((q.z - z0).abs() <= 1e-9);
            }
            for q in &p[corner..] {
                assert!(q.x.abs() <= 1e-9 && q.y.abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let a = generate_vertical(50, 5, &GenSpec::vertical()).unwrap();
        let b = generate_vertical(50, 5, &GenSpec::vertical()).unwrap();
        assert_eq!(a, b);
        let c = generate_vertical(50, 6, &GenSpec::vertical()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn prefix_is_stable_under_larger_n() {
        let a = generate_linear(10, 5, &GenSpec::linear()).unwrap();
        let b = generate_linear(20, 5, &GenSpec::linear()).unwrap();
        assert_eq!(a.trajectories[..], b.trajectories[..10]);
    }

    #[test]
    fn quadrant_matches_direction() {
        let (ds, dirs) = generate(DatasetKind::Vertical, 4000, 1, &GenSpec::vertical()).unwrap();
        let spec = GenSpec::vertical();
        let hits = ds
            .trajectories
            .iter()
            .zip(&dirs)
            .filter(|(t, d)| {
                let m = spec.direction_means[d.0 as usize - 1];
                let p = t.first();
                p.x.signum() == m.x.signum() && p.y.signum() == m.y.signum()
            })
            .count();
        assert!(hits as f64 >= 0.99 * ds.len() as f64);
    }
}
