use std::path::Path;
use std::process::{Command, Output};

fn skyfall(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skyfall"))
        .args(args)
        .current_dir(dir)
        .env_remove("SKYFALL_THREADS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = skyfall(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).skip(1).map(String::from).collect()
}

#[test]
fn gen_data_writes_twenty_rows_per_trajectory_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["gen-data", "--kind", "vertical", "--n", "31", "--seed", "42", "--out", "v.csv"]);
    assert_eq!(data_rows(&dir.path().join("v.csv")).len(), 31 * 20);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let config: serde_json::Value = serde_json::from_str(stderr.lines().next().unwrap()).unwrap();
    assert_eq!(config["command"], "gen-data");
    assert_eq!(config["seed"], 42);
    assert_eq!(config["xy_sigma"], 50.0);
}

#[test]
fn eval_of_identical_prediction_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-data", "--kind", "linear", "--n", "12", "--seed", "1", "--out", "l.csv"]);
    ok(dir.path(), &["eval", "--pred", "l.csv", "--data", "l.csv", "--out-dir", "rep"]);
    let rows = data_rows(&dir.path().join("rep/linear_pred_ade.csv"));
    assert_eq!(rows.len(), 10);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row, &format!("{},0,0", k + 1));
    }
    assert_eq!(data_rows(&dir.path().join("rep/linear_pred_axis.csv")).len(), 30);
}

fn pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let run = |args: &[&str]| {
        ok(dir, args);
    };
    run(&["gen-data", "--kind", "vertical", "--n", "40", "--seed", "5", "--out", "v.csv"]);
    run(&[
        "train",
        "--method",
        "gmr",
        "--data",
        "v.csv",
        "--seed",
        "5",
        "--eval-count",
        "10",
        "--k",
        "2",
        "--out",
        "gmr.json",
    ]);
    run(&[
        "train",
        "--method",
        "gan",
        "--data",
        "v.csv",
        "--seed",
        "5",
        "--eval-count",
        "10",
        "--epochs",
        "2",
        "--batch",
        "8",
        "--hidden-dim",
        "8",
        "--embed-dim",
        "4",
        "--pool-hidden",
        "8",
        "--out",
        "gan.json",
    ]);
    run(&["predict", "--model", "gan.json", "--data", "v.csv", "--out", "pred.csv"]);
    run(&["eval", "--model", "gmr.json", "--data", "v.csv", "--out-dir", "rep"]);
    run(&["eval", "--model", "gan.json", "--data", "v.csv", "--out-dir", "rep", "--format", "json"]);
    run(&["eval", "--pred", "pred.csv", "--data", "v.csv", "--out-dir", "rep", "--label", "gan"]);
    run(&["score", "--model", "gan.json", "--data", "v.csv", "--out", "rep/vertical_score.csv"]);
    let mut files = Vec::new();
    for name in ["v.csv", "gmr.json", "gan.json", "pred.csv"] {
        files.push((name.to_string(), std::fs::read(dir.join(name)).unwrap()));
    }
    let mut reports: Vec<_> = std::fs::read_dir(dir.join("rep")).unwrap().map(|e| e.unwrap().path()).collect();
    reports.sort();
    for p in reports {
        files.push((p.file_name().unwrap().to_string_lossy().into(), std::fs::read(&p).unwrap()));
    }
    files
}

#[test]
fn full_pipeline_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = pipeline(a.path());
    let fb = pipeline(b.path());
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    for want in [
        "vertical_gmr_ade.csv",
        "vertical_gmr_axis.csv",
        "vertical_gan_ade.json",
        "vertical_gan_ade.csv",
        "vertical_score.csv",
    ] {
        assert!(names.contains(&want), "missing {want} in {names:?}");
    }
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs between runs");
    }
    let score = data_rows(&a.path().join("rep/vertical_score.csv"));
    assert_eq!(score.len(), 2);
    assert!(score[0].starts_with("true,") && score[1].starts_with("fake,"));
}

#[test]
fn threads_do_not_change_the_model() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-data", "--kind", "vertical", "--n", "30", "--seed", "2", "--out", "v.csv"]);
    let train = |threads: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_skyfall"))
            .args([
                "train",
                "--method",
                "gan",
                "--data",
                "v.csv",
                "--eval-count",
                "5",
                "--epochs",
                "1",
                "--batch",
                "10",
            ])
            .args(["--hidden-dim", "6", "--embed-dim", "4", "--pool-hidden", "6", "--chunk", "4", "--out", out])
            .current_dir(dir.path())
            .env("SKYFALL_THREADS", threads)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        assert!(status.status.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(train("1", "a.json"), train("3", "b.json"));
}

#[test]
fn failures_map_to_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(skyfall(d, &["gen-data", "--kind", "vertical", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        skyfall(d, &["predict", "--model", "missing.json", "--data", "x.csv", "--out", "p.csv"]).status.code(),
        Some(2)
    );

    ok(d, &["gen-data", "--kind", "vertical", "--n", "20", "--seed", "1", "--out", "v.csv"]);
    ok(d, &["gen-data", "--kind", "linear", "--n", "20", "--seed", "1", "--out", "l.csv"]);
    ok(d, &["train", "--method", "gmr", "--data", "v.csv", "--eval-count", "5", "--k", "1", "--out", "gmr.json"]);
    let mismatch = skyfall(d, &["predict", "--model", "gmr.json", "--data", "l.csv", "--out", "p.csv"]);
    assert_eq!(mismatch.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("trained on vertical"));

    std::fs::write(d.join("bad.csv"), "traj_id,point_idx,x,y,z\n0,0,1,2\n").unwrap();
    let bad = skyfall(d, &["eval", "--model", "gmr.json", "--data", "bad.csv", "--out-dir", "r"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 2"));

    let exploding = skyfall(
        d,
        &[
            "train",
            "--method",
            "gan",
            "--data",
            "v.csv",
            "--eval-count",
            "5",
            "--epochs",
            "30",
            "--batch",
            "5",
            "--lr-g",
            "1e300",
            "--lr-d",
            "1e300",
            "--out",
            "g.json",
        ],
    );
    assert_eq!(exploding.status.code(), Some(4));

    let env = Command::new(env!("CARGO_BIN_EXE_skyfall"))
        .args(["gen-data", "--kind", "vertical", "--n", "2", "--out", "x.csv"])
        .current_dir(d)
        .env("SKYFALL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(env.status.code(), Some(1));
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--kind", "vertical", "--n", "20", "--seed", "9", "--out", "v.csv"]);
    ok(d, &["train", "--method", "gmr", "--data", "v.csv", "--eval-count", "5", "--k", "1", "--out", "gmr.json"]);
    let before = (std::fs::read(d.join("v.csv")).unwrap(), std::fs::read(d.join("gmr.json")).unwrap());
    ok(d, &["predict", "--model", "gmr.json", "--data", "v.csv", "--out", "p.csv"]);
    ok(d, &["eval", "--model", "gmr.json", "--data", "v.csv", "--out-dir", "r"]);
    assert_eq!(before, (std::fs::read(d.join("v.csv")).unwrap(), std::fs::read(d.join("gmr.json")).unwrap()));
}
