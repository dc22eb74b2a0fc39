//! Dataset CSV format.
//!
//! ```text
//! # kind=vertical
//! # seed=42
//! traj_id,point_idx,x,y,z
//! 0,0,-187.3,210.9,74.1
//! ...
//! ```
//!
//! Leading `#` lines carry optional metadata (`kind`, `seed`, `norm_mean`,
//! `norm_scale`); a file without them is read as real data. Rows are grouped
//! by `traj_id` with `point_idx` running 0..=19. Floats are written with 17
//! significant digits so a write/read cycle is bit-exact.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::{Dataset, DatasetKind, NormStats, Point3, Trajectory, TrajectoryError, TRAJ_LEN};
use crate::fmt::fmt_g;

pub const HEADER: &str = "traj_id,point_idx,x,y,z";

pub fn render_dataset(d: &Dataset) -> String {
    let mut out = String::with_capacity(64 + d.len() * TRAJ_LEN * 64);
    out.push_str(&format!("# kind={}\n", d.kind));
    if let Some(seed) = d.seed {
        out.push_str(&format!("# seed={seed}\n"));
    }
    if let Some(norm) = &d.norm {
        let join = |v: [f64; 3]| v.map(|x| fmt_g(x, 17)).join(",");
        out.push_str(&format!("# norm_mean={}\n", join(norm.mean)));
        out.push_str(&format!("# norm_scale={}\n", join(norm.scale)));
    }
    out.push_str(HEADER);
    out.push('\n');
    for (id, t) in d.trajectories.iter().enumerate() {
        for (k, p) in t.points().iter().enumerate() {
            out.push_str(&format!("{id},{k},{},{},{}\n", fmt_g(p.x, 17), fmt_g(p.y, 17), fmt_g(p.z, 17)));
        }
    }
    out
}

pub fn write_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<(), TrajectoryError> {
    fs::write(path, render_dataset(d))?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset, TrajectoryError> {
    parse_dataset(&fs::read_to_string(path)?)
}

struct Group {
    id: u64,
    first_line: usize,
    points: Vec<Point3>,
}

pub fn parse_dataset(text: &str) -> Result<Dataset, TrajectoryError> {
    let err = |line: usize, msg: String| TrajectoryError::Parse { line, msg };

    let mut kind = DatasetKind::Real;
    let mut seed = None;
    let mut norm_mean = None;
    let mut norm_scale = None;
    let mut saw_header = false;
    let mut trajectories = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Option<Group> = None;

    let finish = |g: Group, out: &mut Vec<Trajectory>| -> Result<(), TrajectoryError> {
        if g.points.len() != TRAJ_LEN {
            return Err(err(
                g.first_line,
                format!("trajectory {} has {} points, expected {TRAJ_LEN}", g.id, g.points.len()),
            ));
        }
        out.push(Trajectory::new(&g.points).map_err(|e| err(g.first_line, format!("trajectory {}: {e}", g.id)))?);
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if let Some(meta) = line.strip_prefix('#') {
                let Some((key, value)) = meta.trim().split_once('=') else { continue };
                let value = value.trim();
                match key.trim() {
                    "kind" => kind = value.parse().map_err(|e: String| err(line_no, e))?,
                    "seed" => seed = Some(value.parse().map_err(|_| err(line_no, format!("bad seed '{value}'")))?),
                    "norm_mean" => {
                        norm_mean = Some(parse_triple(value).ok_or_else(|| err(line_no, "bad norm_mean".into()))?)
                    }
                    "norm_scale" => {
                        norm_scale = Some(parse_triple(value).ok_or_else(|| err(line_no, "bad norm_scale".into()))?)
                    }
                    _ => {}
                }
                continue;
            }
            if line != HEADER {
                return Err(err(line_no, format!("expected header '{HEADER}', found '{line}'")));
            }
            saw_header = true;
            continue;
        }

        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(err(line_no, format!("expected 5 fields, found {}", fields.len())));
        }
        let id: u64 = fields[0].parse().map_err(|_| err(line_no, format!("bad traj_id '{}'", fields[0])))?;
        let idx: usize = fields[1].parse().map_err(|_| err(line_no, format!("bad point_idx '{}'", fields[1])))?;
        let mut xyz = [0.0; 3];
        for (slot, f) in xyz.iter_mut().zip(&fields[2..]) {
            let v: f64 = f.parse().map_err(|_| err(line_no, format!("bad coordinate '{f}'")))?;
            if !v.is_finite() {
                return Err(err(line_no, format!("non-finite coordinate '{f}'")));
            }
            *slot = v;
        }

        if current.as_ref().is_none_or(|g| g.id != id) {
            if let Some(g) = current.take() {
                finish(g, &mut trajectories)?;
            }
            if !seen.insert(id) {
                return Err(err(line_no, format!("trajectory {id} appears in more than one block")));
            }
            current = Some(Group { id, first_line: line_no, points: Vec::with_capacity(TRAJ_LEN) });
        }
        let g = current.as_mut().expect("group just opened");
        if idx != g.points.len() {
            return Err(err(
                line_no,
                format!("trajectory {id}: point_idx {idx} out of order, expected {}", g.points.len()),
            ));
        }
        if idx >= TRAJ_LEN {
            return Err(err(line_no, format!("trajectory {id} has more than {TRAJ_LEN} points")));
        }
        g.points.push(Point3::from_slice(&xyz));
    }
    if let Some(g) = current.take() {
        finish(g, &mut trajectories)?;
    }
    if !saw_header {
        return Err(err(text.lines().count().max(1), "missing header".into()));
    }

    let norm = match (norm_mean, norm_scale) {
        (Some(mean), Some(scale)) => Some(NormStats { mean, scale }),
        _ => None,
    };
    Ok(Dataset { kind, trajectories, seed, norm })
}

fn parse_triple(s: &str) -> Option<[f64; 3]> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse().ok()).collect::<Option<_>>()?;
    <[f64; 3]>::try_from(v).ok()
}
