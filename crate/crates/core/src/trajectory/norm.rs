use serde::{Deserialize, Serialize};

use super::{Point3, Trajectory, TrajectoryError};

/// Per-axis affine normalization: `(p - mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 3],
    pub scale: [f64; 3],
}

impl NormStats {
    /// Leaves points untouched.
    pub const IDENTITY: NormStats = NormStats { mean: [0.0; 3], scale: [1.0; 3] };

    pub fn normalize_point(&self, p: Point3) -> Point3 {
        Point3::new(
            (p.x - self.mean[0]) / self.scale[0],
            (p.y - self.mean[1]) / self.scale[1],
            (p.z - self.mean[2]) / self.scale[2],
        )
    }

    pub fn denormalize_point(&self, p: Point3) -> Point3 {
        Point3::new(
            p.x * self.scale[0] + self.mean[0],
            p.y * self.scale[1] + self.mean[1],
            p.z * self.scale[2] + self.mean[2],
        )
    }

    /// Displacements only need rescaling.
    pub fn normalize_delta(&self, d: Point3) -> Point3 {
        Point3::new(d.x / self.scale[0], d.y / self.scale[1], d.z / self.scale[2])
    }

    pub fn normalize(&self, t: &Trajectory) -> Trajectory {
        let pts: Vec<Point3> = t.points().iter().map(|&p| self.normalize_point(p)).collect();
        Trajectory::new(&pts).expect("finite stats keep points finite")
    }

    pub fn denormalize(&self, t: &Trajectory) -> Trajectory {
        let pts: Vec<Point3> = t.points().iter().map(|&p| self.denormalize_point(p)).collect();
        Trajectory::new(&pts).expect("finite stats keep points finite")
    }

    pub fn is_valid(&self) -> bool {
        self.mean.iter().all(|m| m.is_finite()) && self.scale.iter().all(|s| s.is_finite() && *s > 0.0)
    }
}

/// Mean and population standard deviation of every point, per axis. An axis
/// with zero variance gets scale 1.
pub fn compute_norm(trajectories: &[Trajectory]) -> Result<NormStats, TrajectoryError> {
    if trajectories.is_empty() {
        return Err(TrajectoryError::EmptyDataset);
    }
    let count = (trajectories.len() * super::TRAJ_LEN) as f64;
    let mut mean = [0.0; 3];
    for p in trajectories.iter().flat_map(|t| t.points()) {
        for (m, v) in mean.iter_mut().zip(p.to_array()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = [0.0; 3];
    for p in trajectories.iter().flat_map(|t| t.points()) {
        for ((s, v), m) in var.iter_mut().zip(p.to_array()).zip(mean) {
            *s += (v - m) * (v - m);
        }
    }
    let mut scale = [1.0; 3];
    for (axis, (s, v)) in scale.iter_mut().zip(var).enumerate() {
        let sd = (v / count).sqrt();
        if sd > 0.0 && sd.is_finite() {
            *s = sd;
        } else {
            log::warn!("axis {axis} has zero variance; normalization scale clamped to 1");
        }
    }
    Ok(NormStats { mean, scale })
}
