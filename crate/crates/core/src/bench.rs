//! Per-point displacement error, per-axis error and discriminator score
//! summaries, with CSV and JSON rendering.
//!
//! Standard deviations divide by N: the evaluation set is treated as the
//! whole population of interest.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fmt::{fmt_g, to_json_string};
use crate::gan::{GanError, GanModel};
use crate::trajectory::{Point3, Trajectory, PRED_LEN};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("expected {expected} entries, got {got}")]
    Length { expected: usize, got: usize },
    #[error("cannot summarize an empty set")]
    Empty,
    #[error(transparent)]
    Model(#[from] GanError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub const AXES: [&str; 3] = ["x", "y", "z"];

fn check(expected: usize, got: usize) -> Result<(), BenchError> {
    if expected != got {
        return Err(BenchError::Length { expected, got });
    }
    Ok(())
}

/// Euclidean distance at each of the 10 predicted indices.
pub fn displacement_per_point(pred: &[Point3], truth: &[Point3]) -> Result<[f64; PRED_LEN], BenchError> {
    check(PRED_LEN, pred.len())?;
    check(PRED_LEN, truth.len())?;
    let mut out = [0.0; PRED_LEN];
    for (o, (p, t)) in out.iter_mut().zip(pred.iter().zip(truth)) {
        *o = (*p - *t).norm();
    }
    Ok(out)
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStat {
    pub point: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdeReport {
    pub dataset: String,
    pub method: String,
    pub n: usize,
    pub points: Vec<PointStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisEntry {
    pub point: usize,
    pub axis: String,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub dataset: String,
    pub method: String,
    pub n: usize,
    pub entries: Vec<AxisEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetStat {
    pub set: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub dataset: String,
    pub real: SetStat,
    pub fake: SetStat,
}

fn check_sets<P: AsRef<[Point3]>>(preds: &[P], truths: &[P]) -> Result<(), BenchError> {
    if preds.is_empty() {
        return Err(BenchError::Empty);
    }
    check(preds.len(), truths.len())
}

/// Point indices are reported 1-based.
pub fn ade_report<P: AsRef<[Point3]>>(
    preds: &[P],
    truths: &[P],
    dataset: &str,
    method: &str,
) -> Result<AdeReport, BenchError> {
    check_sets(preds, truths)?;
    let per_traj: Vec<[f64; PRED_LEN]> = preds
        .iter()
        .zip(truths)
        .map(|(p, t)| displacement_per_point(p.as_ref(), t.as_ref()))
        .collect::<Result<_, _>>()?;
    let points = (0..PRED_LEN)
        .map(|k| {
            let col: Vec<f64> = per_traj.iter().map(|d| d[k]).collect();
            let (mean, std) = mean_std(&col);
            PointStat { point: k + 1, mean, std }
        })
        .collect();
    Ok(AdeReport { dataset: dataset.into(), method: method.into(), n: preds.len(), points })
}

/// Mean absolute error per point index and axis, point-major.
pub fn axis_report<P: AsRef<[Point3]>>(
    preds: &[P],
    truths: &[P],
    dataset: &str,
    method: &str,
) -> Result<AxisReport, BenchError> {
    check_sets(preds, truths)?;
    let mut sums = [[0.0; 3]; PRED_LEN];
    for (p, t) in preds.iter().zip(truths) {
        let (p, t) = (p.as_ref(), t.as_ref());
        check(PRED_LEN, p.len())?;
        check(PRED_LEN, t.len())?;
        for k in 0..PRED_LEN {
            let d = (p[k] - t[k]).to_array();
            for a in 0..3 {
                sums[k][a] += d[a].abs();
            }
        }
    }
    let n = preds.len() as f64;
    let entries = (0..PRED_LEN)
        .flat_map(|k| {
            AXES.iter().enumerate().map(move |(a, name)| AxisEntry {
                point: k + 1,
                axis: (*name).into(),
                mean_abs: sums[k][a] / n,
            })
        })
        .collect();
    Ok(AxisReport { dataset: dataset.into(), method: method.into(), n: preds.len(), entries })
}

pub fn score_summary(real: &[f64], fake: &[f64], dataset: &str) -> Result<ScoreReport, BenchError> {
    if real.is_empty() || fake.is_empty() {
        return Err(BenchError::Empty);
    }
    let stat = |set: &str, v: &[f64]| {
        let (mean, std) = mean_std(v);
        SetStat { set: set.into(), n: v.len(), mean, std }
    };
    Ok(ScoreReport { dataset: dataset.into(), real: stat("true", real), fake: stat("fake", fake) })
}

/// Raw discriminator scores of both sets, summarized.
pub fn score_report(
    model: &GanModel,
    true_set: &[Trajectory],
    fake_set: &[Trajectory],
    dataset: &str,
) -> Result<ScoreReport, BenchError> {
    score_summary(&model.score(true_set)?, &model.score(fake_set)?, dataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub trait Report: Serialize {
    fn to_csv(&self) -> String;

    /// JSON with 17 significant digits.
    fn to_json(&self) -> Result<String, BenchError> {
        Ok(to_json_string(self)?)
    }

    fn render(&self, format: Format) -> Result<String, BenchError> {
        match format {
            Format::Csv => Ok(self.to_csv()),
            Format::Json => self.to_json(),
        }
    }
}

fn g6(x: f64) -> String {
    fmt_g(x, 6)
}

impl Report for AdeReport {
    fn to_csv(&self) -> String {
        let mut s =
            format!("# dataset={} method={} n={} std=population\npoint,mean,std\n", self.dataset, self.method, self.n);
        for p in &self.points {
            s += &format!("{},{},{}\n", p.point, g6(p.mean), g6(p.std));
        }
        s
    }
}

impl Report for AxisReport {
    fn to_csv(&self) -> String {
        let mut s = format!("# dataset={} method={} n={}\npoint,axis,mean_abs\n", self.dataset, self.method, self.n);
        for e in &self.entries {
            s += &format!("{},{},{}\n", e.point, e.axis, g6(e.mean_abs));
        }
        s
    }
}

impl Report for ScoreReport {
    fn to_csv(&self) -> String {
        let mut s = format!("# dataset={} n={} std=population\nset,mean,std\n", self.dataset, self.real.n);
        for st in [&self.real, &self.fake] {
            s += &format!("{},{},{}\n", st.set, g6(st.mean), g6(st.std));
        }
        s
    }
}

pub fn render_report(report: &impl Report, format: Format, path: impl AsRef<Path>) -> Result<(), BenchError> {
    std::fs::write(path, report.render(format)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(offset: Point3) -> Vec<Point3> {
        (0..10).map(|k| Point3::new(k as f64, 2.0 * k as f64, -(k as f64)) + offset).collect()
    }

    #[test]
    fn displacement_cases() {
        let t = line(Point3::ZERO);
        assert_eq!(displacement_per_point(&t, &t).unwrap(), [0.0; 10]);
        assert_eq!(displacement_per_point(&line(Point3::new(3.0, 4.0, 0.0)), &t).unwrap(), [5.0; 10]);
        let d = displacement_per_point(&line(Point3::new(1.0, 1.0, 1.0)), &t).unwrap();
        assert!(d.iter().all(|v| (v - 1.732_050_8).abs() < 1e-7));
        assert!(displacement_per_point(&t[..9], &t).is_err());
    }

    #[test]
    fn ade_single_and_pair() {
        let t = line(Point3::ZERO);
        let r = ade_report(&[line(Point3::new(3.0, 4.0, 0.0))], std::slice::from_ref(&t), "vertical", "gan").unwrap();
        assert!(r.points.iter().all(|p| p.mean == 5.0 && p.std == 0.0));
        assert_eq!(r.points[0].point, 1);
        assert_eq!(r.points[9].point, 10);

        let preds = [line(Point3::new(1.0, 0.0, 0.0)), line(Point3::new(0.0, 3.0, 0.0))];
        let r = ade_report(&preds, &[t.clone(), t], "vertical", "gan").unwrap();
        assert!(r.points.iter().all(|p| p.mean == 2.0 && p.std == 1.0));
    }

    #[test]
    fn ade_rejects_mismatch_and_empty() {
        let t = line(Point3::ZERO);
        assert!(ade_report(std::slice::from_ref(&t), &[t.clone(), t.clone()], "v", "m").is_err());
        assert!(matches!(ade_report::<Vec<Point3>>(&[], &[], "v", "m"), Err(BenchError::Empty)));
    }

    #[test]
    fn axis_offsets() {
        let t = line(Point3::ZERO);
        let r = axis_report(std::slice::from_ref(&t), std::slice::from_ref(&t), "v", "m").unwrap();
        assert_eq!(r.entries.len(), 30);
        assert!(r.entries.iter().all(|e| e.mean_abs == 0.0));
        let r = axis_report(&[line(Point3::new(3.0, -4.0, 0.0))], &[t], "v", "m").unwrap();
        for e in &r.entries {
            let want = match e.axis.as_str() {
                "x" => 3.0,
                "y" => 4.0,
                _ => 0.0,
            };
            assert_eq!(e.mean_abs, want);
        }
    }

    #[test]
    fn score_summary_of_identical_sets_matches() {
        let s = [1.0, -2.0, 0.5];
        let r = score_summary(&s, &s, "vertical").unwrap();
        assert_eq!((r.real.mean, r.real.std), (r.fake.mean, r.fake.std));
        let csv = r.to_csv();
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].starts_with("true,") && rows[2].starts_with("fake,"));
    }

    #[test]
    fn csv_and_json_rendering() {
        let t = line(Point3::ZERO);
        let r = ade_report(&[line(Point3::new(1.0 / 3.0, 0.0, 0.0))], &[t], "vertical", "gmr").unwrap();
        let csv = r.to_csv();
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "point,mean,std");
        assert_eq!(rows.len(), 11);
        assert_eq!(rows[1], "1,0.333333,0");
        let back: AdeReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for (a, b) in back.points.iter().zip(&r.points) {
            assert!((a.mean - b.mean).abs() < 1e-12);
        }
        assert_eq!(back, r);
    }

    #[test]
    fn render_writes_file_and_reports_bad_path() {
        let dir = tempfile::tempdir().unwrap();
        let r = score_summary(&[1.0], &[2.0], "v").unwrap();
        let path = dir.path().join("s.json");
        render_report(&r, Format::Json, &path).unwrap();
        let back: ScoreReport = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(matches!(render_report(&r, Format::Csv, dir.path().join("no/such/dir.csv")), Err(BenchError::Io(_))));
    }

    fn pts() -> impl Strategy<Value = Vec<Point3>> {
        prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0, -100.0f64..100.0), 10)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect())
    }

    fn close(a: &AdeReport, b: &AdeReport, tol: f64) -> bool {
        a.points.iter().zip(&b.points).all(|(p, q)| (p.mean - q.mean).abs() <= tol && (p.std - q.std).abs() <= tol)
    }

    proptest! {
        #[test]
        fn ade_is_symmetric(a in prop::collection::vec(pts(), 1..5), b in prop::collection::vec(pts(), 5)) {
            let b = &b[..a.len()];
            let x = ade_report(&a, b, "v", "m").unwrap();
            let y = ade_report(b, &a, "v", "m").unwrap();
            prop_assert_eq!(x, y);
        }

        #[test]
        fn ade_is_translation_invariant(a in pts(), b in pts(), c in (-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3)) {
            let c = Point3::new(c.0, c.1, c.2);
            let shift = |v: &[Point3]| v.iter().map(|p| *p + c).collect::<Vec<_>>();
            let x = ade_report(std::slice::from_ref(&a), std::slice::from_ref(&b), "v", "m").unwrap();
            let y = ade_report(&[shift(&a)], &[shift(&b)], "v", "m").unwrap();
            prop_assert!(close(&x, &y, 1e-12 * (1.0 + c.norm())));
        }

        #[test]
        fn ade_scales_linearly(a in prop::collection::vec(pts(), 2), b in prop::collection::vec(pts(), 2), s in 0.01f64..100.0) {
            let scale = |v: &[Vec<Point3>]| v.iter().map(|t| t.iter().map(|p| *p * s).collect::<Vec<_>>()).collect::<Vec<_>>();
            let x = ade_report(&a, &b, "v", "m").unwrap();
            let y = ade_report(&scale(&a), &scale(&b), "v", "m").unwrap();
            for (p, q) in x.points.iter().zip(&y.points) {
                prop_assert!((p.mean * s - q.mean).abs() <= 1e-9 * q.mean.max(1.0));
                prop_assert!((p.std * s - q.std).abs() <= 1e-9 * q.mean.max(1.0));
            }
        }

        #[test]
        fn axis_error_never_exceeds_distance(a in pts(), b in pts()) {
            let d = displacement_per_point(&a, &b).unwrap();
            for k in 0..10 {
                let e = (a[k] - b[k]).to_array();
                let m = e.iter().map(|v| v.abs()).fold(0.0, f64::max);
                prop_assert!(m <= d[k]);
            }
        }
    }
}
