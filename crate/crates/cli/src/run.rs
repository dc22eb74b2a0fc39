use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use skyfall::bench::{ade_report, axis_report, render_report, score_report, Format, Report};
use skyfall::fmt::to_json_string;
use skyfall::gan::{self, GanFile, GanModel, TrainConfig};
use skyfall::gmm::{EmConfig, GmrFile, GmrModel};
use skyfall::trajectory::{
    generate, read_dataset, write_dataset, Dataset, DatasetKind, GenSpec, Point3, SplitSpec, Trajectory, PRED_LEN,
};

use crate::args::{
    Command, EvalArgs, GenDataArgs, GenKind, Method, PredictArgs, ReportFormat, ScoreArgs, Selection, TrainArgs,
};
use crate::error::CliError;

const DEFAULT_EVAL_COUNT: usize = 100;

/// Prints the resolved configuration to stderr exactly once.
pub struct Announcer {
    base: Map<String, Value>,
    done: bool,
}

impl Announcer {
    pub fn new(command: &Command, threads: usize) -> Self {
        let mut base = match serde_json::to_value(command) {
            Ok(Value::Object(m)) => m,
            _ => Map::new(),
        };
        base.insert("threads".into(), json!(threads));
        Announcer { base, done: false }
    }

    pub fn announce(&mut self, extra: &[(&str, Value)]) {
        if self.done {
            return;
        }
        let mut m = self.base.clone();
        for (k, v) in extra {
            m.insert((*k).into(), v.clone());
        }
        eprintln!("{}", Value::Object(m));
        self.done = true;
    }
}

pub fn run(command: &Command, threads: usize, ann: &mut Announcer) -> Result<(), CliError> {
    match command {
        Command::GenData(a) => gen_data(a, ann),
        Command::Train(a) => train(a, threads, ann),
        Command::Predict(a) => predict(a, ann),
        Command::Eval(a) => eval(a, ann),
        Command::Score(a) => score(a, ann),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_data(path: &Path) -> Result<Dataset, CliError> {
    if !path.is_file() {
        return Err(CliError::io(path, "no such file"));
    }
    read_dataset(path).map_err(|e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn gen_data(a: &GenDataArgs, ann: &mut Announcer) -> Result<(), CliError> {
    let kind = match a.kind {
        GenKind::Vertical => DatasetKind::Vertical,
        GenKind::Linear => DatasetKind::Linear,
    };
    let mut spec = GenSpec::default_for(kind).expect("synthetic kind");
    if let Some(s) = a.xy_sigma {
        spec.xy_sigma = s;
    }
    if let Some(s) = a.z_sigma {
        spec.z_sigma = s;
    }
    ann.announce(&[("xy_sigma", json!(spec.xy_sigma)), ("z_sigma", json!(spec.z_sigma))]);
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let (ds, _) = generate(kind, a.n, a.seed, &spec)?;
    write_dataset(&ds, &a.out).map_err(|e| CliError::io(&a.out, e))
}

fn train(a: &TrainArgs, threads: usize, ann: &mut Announcer) -> Result<(), CliError> {
    let split = SplitSpec { seed: a.seed, eval_count: a.eval_count };
    ann.announce(&[(
        "split",
        json!({"seed": split.seed, "eval_count": split.eval_count, "rule": "seeded shuffle, last eval_count held out"}),
    )]);
    let data = load_data(&a.data)?;
    let (train_set, eval_set) = split.apply(&data);
    if train_set.is_empty() {
        return Err(CliError::Data(format!("no training trajectories left after holding out {}", eval_set.len())));
    }
    let text = match a.method {
        Method::Gmr => {
            let cfg = EmConfig {
                max_iters: a.em_iters,
                ll_tolerance: a.em_tol,
                cov_regularization: a.cov_reg,
                n_restarts: a.em_restarts,
                seed: a.seed,
            };
            let (mut model, history) = GmrModel::fit(&train_set, a.k, &cfg)?;
            log::info!(
                "EM finished after {} iterations, log-likelihood {:.6}",
                history.len() - 1,
                history.last().unwrap_or(&f64::NAN)
            );
            model.dataset_kind = Some(data.kind);
            model.split = Some(split);
            if let Some(path) = &a.history {
                write(
                    path,
                    &to_json_string(&json!({ "log_likelihood": history })).map_err(|e| CliError::io(path, e))?,
                )?;
            }
            to_json_string(&model.to_file())
        }
        Method::Gan => {
            let cfg = TrainConfig {
                epochs: a.epochs,
                batch_size: a.batch,
                lr_g: a.lr_g,
                lr_d: a.lr_d,
                noise_dim: a.noise_dim,
                l2_weight: a.lambda,
                adv_weight: a.adv_weight,
                best_of_k: a.best_of_k,
                d_steps: a.d_steps,
                seed: a.seed,
                env: a.env.clone(),
                embed_dim: a.embed_dim,
                hidden_dim: a.hidden_dim,
                pool_hidden: a.pool_hidden,
                chunk_size: a.chunk,
                eval_every: 10,
                threads,
            };
            let (mut model, history) = gan::train(&train_set, &eval_set, &cfg)?;
            model.dataset_kind = Some(data.kind);
            model.split = Some(split);
            if let Some(path) = &a.history {
                write(path, &to_json_string(&history).map_err(|e| CliError::io(path, e))?)?;
            }
            to_json_string(&model.to_file())
        }
    };
    write(&a.out, &text.map_err(|e| CliError::io(&a.out, e))?)
}

enum Model {
    Gmr(GmrModel),
    Gan(Box<GanModel>),
}

impl Model {
    fn load(path: &Path) -> Result<Model, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let bad = |e: &dyn std::fmt::Display| CliError::Data(format!("{}: {e}", path.display()));
        let value: Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
        match value.get("method").and_then(Value::as_str) {
            Some("gmr") => {
                let f: GmrFile = serde_json::from_value(value).map_err(|e| bad(&e))?;
                Ok(Model::Gmr(GmrModel::from_file(&f).map_err(|e| bad(&e))?))
            }
            Some("gan") => {
                let f: GanFile = serde_json::from_value(value).map_err(|e| bad(&e))?;
                Ok(Model::Gan(Box::new(GanModel::from_file(&f).map_err(|e| bad(&e))?)))
            }
            other => Err(bad(&format!("unknown model method {other:?}"))),
        }
    }

    fn method(&self) -> &'static str {
        match self {
            Model::Gmr(_) => "gmr",
            Model::Gan(_) => "gan",
        }
    }

    fn kind(&self) -> Option<DatasetKind> {
        match self {
            Model::Gmr(m) => m.dataset_kind,
            Model::Gan(m) => m.dataset_kind,
        }
    }

    fn split(&self) -> Option<SplitSpec> {
        match self {
            Model::Gmr(m) => m.split,
            Model::Gan(m) => m.split,
        }
    }

    fn check_kind(&self, data: &Dataset, path: &Path) -> Result<(), CliError> {
        match self.kind() {
            Some(k) if k != data.kind => Err(CliError::Data(format!(
                "model was trained on {k} data but {} holds {} data",
                path.display(),
                data.kind
            ))),
            _ => Ok(()),
        }
    }

    fn predict(&self, set: &[Trajectory], seed: u64) -> Result<Vec<[Point3; PRED_LEN]>, CliError> {
        match self {
            Model::Gmr(m) => set.iter().map(|t| m.predict(t.observed()).map_err(CliError::from)).collect(),
            Model::Gan(m) => {
                let obs: Vec<&[Point3]> = set.iter().map(Trajectory::observed).collect();
                Ok(m.predict(&obs, seed)?)
            }
        }
    }
}

/// The held-out trajectories, or all of them with `--all`.
fn select(data: &Dataset, sel: &Selection, recorded: Option<SplitSpec>) -> (Vec<Trajectory>, Value) {
    if sel.all {
        return (data.trajectories.clone(), json!("all"));
    }
    let split = SplitSpec {
        seed: sel.split_seed.or(recorded.map(|s| s.seed)).unwrap_or(0),
        eval_count: sel.eval_count.or(recorded.map(|s| s.eval_count)).unwrap_or(DEFAULT_EVAL_COUNT),
    };
    (split.apply(data).1, json!({"seed": split.seed, "eval_count": split.eval_count}))
}

fn predict(a: &PredictArgs, ann: &mut Announcer) -> Result<(), CliError> {
    let model = Model::load(&a.model)?;
    let data = load_data(&a.data)?;
    model.check_kind(&data, &a.data)?;
    let (set, resolved) = select(&data, &a.selection, model.split());
    ann.announce(&[("method", json!(model.method())), ("selection", resolved)]);
    let preds = model.predict(&set, a.seed)?;
    let trajs =
        set.iter().zip(&preds).map(|(t, p)| Trajectory::join(t.observed(), p)).collect::<Result<Vec<_>, _>>()?;
    let out = Dataset::new(data.kind, trajs, None);
    write_dataset(&out, &a.out).map_err(|e| CliError::io(&a.out, e))
}

/// Observed halves as exact bit patterns, for pairing predictions with truth.
fn observed_key(t: &Trajectory) -> Vec<u64> {
    t.observed().iter().flat_map(|p| p.to_array().map(f64::to_bits)).collect()
}

fn report_path(dir: &Path, dataset: &str, method: &str, what: &str, format: ReportFormat) -> PathBuf {
    let ext = match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    };
    dir.join(format!("{dataset}_{method}_{what}.{ext}"))
}

fn fmt_of(f: ReportFormat) -> Format {
    match f {
        ReportFormat::Csv => Format::Csv,
        ReportFormat::Json => Format::Json,
    }
}

fn eval(a: &EvalArgs, ann: &mut Announcer) -> Result<(), CliError> {
    let data = load_data(&a.data)?;
    let (method, preds, truths) = if let Some(pred_path) = &a.pred {
        ann.announce(&[("method", json!(a.label)), ("selection", json!("pred file"))]);
        let pred = load_data(pred_path)?;
        if pred.kind != data.kind {
            return Err(CliError::Data(format!(
                "prediction file holds {} data but truth holds {}",
                pred.kind, data.kind
            )));
        }
        let by_obs: HashMap<Vec<u64>, &Trajectory> = data.trajectories.iter().map(|t| (observed_key(t), t)).collect();
        let mut preds = Vec::with_capacity(pred.len());
        let mut truths = Vec::with_capacity(pred.len());
        for (i, p) in pred.trajectories.iter().enumerate() {
            let t = by_obs.get(&observed_key(p)).ok_or_else(|| {
                CliError::Data(format!(
                    "prediction {i} has no trajectory with the same observed points in {}",
                    a.data.display()
                ))
            })?;
            preds.push(p.future().to_vec());
            truths.push(t.future().to_vec());
        }
        (a.label.clone(), preds, truths)
    } else {
        let path = a.model.as_ref().expect("clap requires --model or --pred");
        let model = Model::load(path)?;
        model.check_kind(&data, &a.data)?;
        let (set, resolved) = select(&data, &a.selection, model.split());
        ann.announce(&[("method", json!(model.method())), ("selection", resolved)]);
        let preds = model.predict(&set, a.seed)?.iter().map(|p| p.to_vec()).collect();
        let truths = set.iter().map(|t| t.future().to_vec()).collect();
        (model.method().to_string(), preds, truths)
    };
    if preds.is_empty() {
        return Err(CliError::Data("nothing to evaluate".into()));
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let dataset = data.kind.as_str();
    let ade = ade_report(&preds, &truths, dataset, &method)?;
    let axis = axis_report(&preds, &truths, dataset, &method)?;
    let fmt = fmt_of(a.format);
    render_report(&ade, fmt, report_path(&a.out_dir, dataset, &method, "ade", a.format))?;
    render_report(&axis, fmt, report_path(&a.out_dir, dataset, &method, "axis", a.format))?;
    eprint!("{}", ade.to_csv());
    Ok(())
}

fn score(a: &ScoreArgs, ann: &mut Announcer) -> Result<(), CliError> {
    let loaded = Model::load(&a.model)?;
    if let Model::Gmr(_) = loaded {
        return Err(CliError::Usage("score needs a GAN model".into()));
    }
    let data = load_data(&a.data)?;
    loaded.check_kind(&data, &a.data)?;
    let Model::Gan(model) = loaded else { unreachable!("checked above") };
    let (set, resolved) = select(&data, &a.selection, model.split);
    ann.announce(&[("selection", resolved)]);
    if set.is_empty() {
        return Err(CliError::Data("nothing to score".into()));
    }
    let fakes = model.fake_trajectories(&set, a.seed)?;
    let report = score_report(&model, &set, &fakes, data.kind.as_str())?;
    let fmt = if a.out.extension().is_some_and(|e| e == "json") { Format::Json } else { Format::Csv };
    render_report(&report, fmt, &a.out)?;
    eprint!("{}", report.to_csv());
    Ok(())
}
