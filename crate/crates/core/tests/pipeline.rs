use skyfall::bench::{ade_report, displacement_per_point, Format, Report};
use skyfall::gan::{train, GanFile, GanModel, TrainConfig};
use skyfall::gmm::{EmConfig, GmrFile, GmrModel};
use skyfall::trajectory::{generate, read_dataset, write_dataset, DatasetKind, GenSpec, Point3, SplitSpec, Trajectory};

fn futures(set: &[Trajectory]) -> Vec<&[Point3]> {
    set.iter().map(Trajectory::future).collect()
}

#[test]
fn dataset_survives_a_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("linear.csv");
    let (ds, _) = generate(DatasetKind::Linear, 25, 3, &GenSpec::linear()).unwrap();
    write_dataset(&ds, &path).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back.kind, DatasetKind::Linear);
    assert_eq!(back.trajectories, ds.trajectories);
}

#[test]
fn gmr_predicts_noiseless_vertical_landings_closely() {
    let (ds, _) = generate(DatasetKind::Vertical, 400, 6, &GenSpec::vertical()).unwrap();
    let (train_set, eval_set) = SplitSpec { seed: 6, eval_count: 40 }.apply(&ds);
    let (model, history) = GmrModel::fit(&train_set, 4, &EmConfig { seed: 6, ..Default::default() }).unwrap();
    assert!(history.windows(2).all(|w| w[1] >= w[0]), "{history:?}");

    let json = serde_json::to_string(&model.to_file()).unwrap();
    let model = GmrModel::from_file(&serde_json::from_str::<GmrFile>(&json).unwrap()).unwrap();

    let preds: Vec<Vec<Point3>> = eval_set.iter().map(|t| model.predict(t.observed()).unwrap().to_vec()).collect();
    let truths: Vec<Vec<Point3>> = futures(&eval_set).into_iter().map(<[Point3]>::to_vec).collect();
    let report = ade_report(&preds, &truths, "vertical", "gmr").unwrap();
    assert_eq!(report.n, 40);
    // the landing point is fixed and the early future continues the observed motion
    assert!(report.points[0].mean < 0.05, "{report:?}");
    assert!(report.points[9].mean < 1e-6, "{report:?}");
    assert!(report.points.iter().all(|p| p.mean < 5.0), "{report:?}");
    assert!(report.render(Format::Csv).unwrap().contains("point,mean,std"));
}

#[test]
fn trained_gan_reloads_with_identical_predictions() {
    let (ds, _) = generate(DatasetKind::Vertical, 60, 7, &GenSpec::vertical()).unwrap();
    let (train_set, eval_set) = SplitSpec { seed: 7, eval_count: 10 }.apply(&ds);
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 16,
        embed_dim: 4,
        hidden_dim: 8,
        pool_hidden: 8,
        seed: 7,
        ..Default::default()
    };
    let (model, history) = train(&train_set, &eval_set, &cfg).unwrap();
    assert_eq!(history.epochs.len(), 4);
    assert!(history.epochs.last().unwrap().eval_ade.is_some());

    let json = serde_json::to_string(&model.to_file()).unwrap();
    let reloaded = GanModel::from_file(&serde_json::from_str::<GanFile>(&json).unwrap()).unwrap();
    let observed: Vec<&[Point3]> = eval_set.iter().map(Trajectory::observed).collect();
    let a = model.predict(&observed, 3).unwrap();
    let b = reloaded.predict(&observed, 3).unwrap();
    assert_eq!(a, b);
    for (p, t) in a.iter().zip(&eval_set) {
        assert!(displacement_per_point(p, t.future()).unwrap().iter().all(|d| d.is_finite()));
    }
}
