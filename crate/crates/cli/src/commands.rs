//! The subcommands. Each writes its outputs atomically under `cfg.out` and
//! leaves existing outputs alone unless `overwrite` is set.

use std::fs;
use std::path::{Path, PathBuf};

use lstnet_core::baselines::{fit_ridge_var, fit_univariate_ar, LinearModel};
use lstnet_core::data::{
    autocorrelation, companion_spectral_radius, generate_scale_shift_ar, load_dataset, local_maxima, Part, SplitBounds,
    TimeSeriesDataset,
};
use lstnet_core::eval::{
    format_grid_table, format_table, format_trace, grid_search, parse_grid_table, rolling_evaluate, to_json_line,
    EvalReport, Forecaster, GridOutcome, GridPoint, GridRow, MetricScale,
};
use lstnet_core::io::{atomic_write, index_value_lines};
use lstnet_core::model::checkpoint::{Checkpoint, ModelKind};
use lstnet_core::model::{LstNetModel, WindowBatch};
use lstnet_core::optim::{format_training_log, train, EpochRecord};
use lstnet_core::{Error, Result};
use serde_json::json;

use crate::config::{parse_cli_value, Method, RunConfig};

/// What a command did.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Done,
    /// Outputs were already present; nothing was recomputed.
    Skipped(PathBuf),
}

pub const TRAIN_LOG: &str = "train_log.tsv";
pub const CHECKPOINT: &str = "model.ckpt";
pub const CONFIG_ECHO: &str = "config.toml";
pub const GRID_TABLE: &str = "grid_table.tsv";
pub const BEST_CONFIG: &str = "best_config.toml";

/// A fitted model of any method.
pub enum Fitted {
    Neural {
        model: LstNetModel,
        history: Vec<EpochRecord>,
    },
    Linear(LinearModel),
}

impl Fitted {
    pub fn forecaster(&self) -> &dyn Forecaster {
        match self {
            Fitted::Neural { model, .. } => model,
            Fitted::Linear(m) => m,
        }
    }

    pub fn checkpoint(&self, scales: &[f64], seed: u64) -> Result<Checkpoint> {
        match self {
            Fitted::Neural { model, .. } => Checkpoint::from_model(model, scales, seed),
            Fitted::Linear(m) => m.to_checkpoint(scales, seed),
        }
    }
}

/// The dataset normalized on its training rows, and the split it was fitted on.
pub fn prepare_data(cfg: &RunConfig) -> Result<(TimeSeriesDataset, SplitBounds)> {
    let raw = load_dataset(cfg.dataset_path()?, cfg.delimiter)?;
    let bounds = cfg.split.resolve(raw.len())?;
    Ok((raw.normalize(cfg.normalize, bounds.train_end)?, bounds))
}

/// Fits the configured method on the training part.
pub fn fit(cfg: &RunConfig, ds: &TimeSeriesDataset, bounds: &SplitBounds) -> Result<Fitted> {
    let (q, h) = (cfg.model.window, cfg.model.horizon);
    Ok(match cfg.method {
        Method::Lstnet => {
            let model = LstNetModel::new(cfg.model.clone(), ds.width(), cfg.seed)?;
            let run = train(model, ds, bounds, &cfg.train, cfg.seed)?;
            Fitted::Neural {
                model: run.model,
                history: run.history,
            }
        }
        Method::Ar => Fitted::Linear(fit_univariate_ar(ds, bounds, q, h, cfg.lambda)?),
        Method::Ridge => Fitted::Linear(fit_ridge_var(ds, bounds, q, h, cfg.lambda, cfg.max_features)?),
        Method::Persistence => Fitted::Linear(LinearModel::persistence(ds.width(), h)),
    })
}

fn load_fitted(path: &Path) -> Result<(Fitted, Vec<f64>)> {
    let ck = Checkpoint::load(path)?;
    let fitted = match ck.kind {
        ModelKind::Neural => Fitted::Neural {
            model: ck.to_model()?,
            history: Vec::new(),
        },
        ModelKind::Ridge | ModelKind::UnivariateAr => Fitted::Linear(LinearModel::from_checkpoint(&ck)?),
    };
    Ok((fitted, ck.scales))
}

fn fresh(path: &Path, overwrite: bool) -> Option<Status> {
    (!overwrite && path.exists()).then(|| Status::Skipped(path.to_path_buf()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}

fn echo_config(cfg: &RunConfig) -> Result<()> {
    write_text(&cfg.out.join(CONFIG_ECHO), &cfg.to_toml())
}

fn report_files(out: &Path, stem: &str, reports: &[EvalReport]) -> Result<()> {
    let lines: String = reports.iter().map(|r| to_json_line(r) + "\n").collect();
    write_text(&out.join(format!("{stem}.jsonl")), &lines)?;
    write_text(&out.join(format!("{stem}.txt")), &format_table(reports))
}

/// Fits, checkpoints, and scores the validation part.
pub fn train_cmd(cfg: &RunConfig, overwrite: bool) -> Result<Status> {
    cfg.validate()?;
    let ckpt = cfg.checkpoint_path();
    if let Some(s) = fresh(&ckpt, overwrite) {
        return Ok(s);
    }
    let (ds, bounds) = prepare_data(cfg)?;
    let fitted = fit(cfg, &ds, &bounds)?;
    echo_config(cfg)?;
    if let Fitted::Neural { history, .. } = &fitted {
        write_text(&cfg.out.join(TRAIN_LOG), &format_training_log(history))?;
    }
    let report = rolling_evaluate(fitted.forecaster(), &ds, &bounds, Part::Valid, cfg.eval_scale)?;
    report_files(&cfg.out, "valid_report", &[report])?;
    // Written last: its presence marks a completed run.
    fitted.checkpoint(ds.scales(), cfg.seed)?.save(&ckpt)?;
    Ok(Status::Done)
}

/// Rolling evaluation of a checkpoint (or of persistence, which needs none).
pub fn evaluate_cmd(cfg: &RunConfig, overwrite: bool) -> Result<Status> {
    cfg.validate()?;
    let marker = cfg.out.join("eval_report.jsonl");
    if let Some(s) = fresh(&marker, overwrite) {
        return Ok(s);
    }
    let raw = load_dataset(cfg.dataset_path()?, cfg.delimiter)?;
    let bounds = cfg.split.resolve(raw.len())?;
    let ckpt = cfg.checkpoint_path();
    let (fitted, ds) = if ckpt.exists() {
        let (fitted, scales) = load_fitted(&ckpt)?;
        let ds = raw.apply_scales(&scales)?;
        (fitted, ds)
    } else if cfg.method == Method::Persistence {
        let ds = raw.normalize(cfg.normalize, bounds.train_end)?;
        (
            Fitted::Linear(LinearModel::persistence(ds.width(), cfg.model.horizon)),
            ds,
        )
    } else {
        return Err(Error::Config(format!(
            "no checkpoint at {}; run `train` first or set `checkpoint`",
            ckpt.display()
        )));
    };
    let mut reports = Vec::new();
    for part in cfg.eval_part.parts() {
        let r = rolling_evaluate(fitted.forecaster(), &ds, &bounds, part, cfg.eval_scale)?;
        if cfg.eval_trace {
            write_text(&cfg.out.join(format!("trace_{part}.tsv")), &format_trace(&r))?;
        }
        reports.push(r);
    }
    echo_config(cfg)?;
    write_text(&cfg.out.join("eval_report.txt"), &format_table(&reports))?;
    let lines: String = reports.iter().map(|r| to_json_line(r) + "\n").collect();
    write_text(&marker, &lines)?;
    Ok(Status::Done)
}

/// Forecasts `horizon` steps past the last row, on the raw scale.
pub fn forecast_cmd(cfg: &RunConfig, overwrite: bool) -> Result<Status> {
    let path = cfg.out.join("forecast.tsv");
    if let Some(s) = fresh(&path, overwrite) {
        return Ok(s);
    }
    let (fitted, scales) = load_fitted(&cfg.checkpoint_path())?;
    let raw = load_dataset(cfg.dataset_path()?, cfg.delimiter)?;
    let ds = raw.apply_scales(&scales)?;
    let f = fitted.forecaster();
    let q = f.window();
    if ds.len() < q {
        return Err(Error::WindowTooShort {
            needed: q,
            available: ds.len(),
        });
    }
    let last = ds.len() - 1;
    let batch = WindowBatch::from_windows(q, ds.width(), [ds.window(last, q)])?;
    let pred = f.predict_batch(&batch)?;
    if pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op: "forecast" });
    }
    let mut text = String::from("t\tvariable\tforecast\n");
    for (i, p) in pred.iter().enumerate() {
        text.push_str(&format!("{}\t{i}\t{}\n", last + f.horizon(), p * scales[i]));
    }
    echo_config(cfg)?;
    write_text(&path, &text)?;
    Ok(Status::Done)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64)
}

/// Generates a scale-shift AR series.
pub fn simulate_cmd(cfg: &RunConfig, overwrite: bool) -> Result<Status> {
    let path = cfg.out.join("series.txt");
    if let Some(s) = fresh(&path, overwrite) {
        return Ok(s);
    }
    let spec = cfg.scale_shift_spec();
    let series = generate_scale_shift_ar(&spec)?;
    let mut meta = json!({
        "spec": spec,
        "weights": series.weights,
        "spectral_radius": companion_spectral_radius(&series.weights),
        "burn_in": series.burn_in,
        "weight_draws": series.weight_draws,
    });
    // Without shifts the series should look the same in both halves.
    if spec.mu0 == 0.0 {
        let (a, b) = series.values.split_at(series.values.len() / 2);
        let ((ma, va), (mb, vb)) = (mean_var(a), mean_var(b));
        meta["stationarity"] = json!({
            "first_half": {"mean": ma, "variance": va},
            "second_half": {"mean": mb, "variance": vb},
        });
    }
    let text: String = series.values.iter().map(|v| format!("{v}\n")).collect();
    echo_config(cfg)?;
    write_text(&cfg.out.join("simulate_meta.json"), &format!("{meta:#}\n"))?;
    write_text(&path, &text)?;
    Ok(Status::Done)
}

/// Sample autocorrelation of one variable. Returns the local maxima lags.
pub fn autocorr_cmd(cfg: &RunConfig, overwrite: bool) -> Result<(Status, Vec<usize>)> {
    let path = cfg.out.join("autocorr.txt");
    if let Some(s) = fresh(&path, overwrite) {
        return Ok((s, Vec::new()));
    }
    let ds = load_dataset(cfg.dataset_path()?, cfg.delimiter)?;
    let v = cfg.autocorr_variable;
    if v >= ds.width() {
        return Err(Error::Config(format!(
            "autocorr.variable {v} is out of range for {} variables",
            ds.width()
        )));
    }
    let r = autocorrelation(&ds.column(v), cfg.autocorr_max_lag)?;
    echo_config(cfg)?;
    write_text(&path, &index_value_lines(&r, '\t'))?;
    Ok((Status::Done, local_maxima(&r)))
}

/// The configuration a grid point describes.
pub fn point_config(base: &RunConfig, point: &GridPoint) -> Result<RunConfig> {
    let mut cfg = base.clone();
    cfg.grid = None;
    for (k, v) in &point.assignments {
        cfg.set(k, &parse_cli_value(v))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Trains one grid point and scores it on the validation part.
pub fn score_point(
    base: &RunConfig,
    ds: &TimeSeriesDataset,
    bounds: &SplitBounds,
    point: &GridPoint,
) -> Result<GridOutcome> {
    let cfg = point_config(base, point)?;
    let fitted = fit(&cfg, ds, bounds)?;
    let f = fitted.forecaster();
    let r = rolling_evaluate(f, ds, bounds, Part::Valid, MetricScale::Normalized)?;
    Ok(GridOutcome {
        valid_rse: r.rse,
        valid_corr: r.corr,
        param_count: f.param_count(),
    })
}

/// Grid search over the configured axes, then a retrain and evaluation of
/// the winner under `out/best`.
pub fn grid_cmd(cfg: &RunConfig, overwrite: bool) -> Result<Status> {
    cfg.validate()?;
    let spec = cfg
        .grid
        .as_ref()
        .filter(|g| !g.axes.is_empty())
        .ok_or_else(|| Error::Config("no grid axes configured (add `grid.\"<key>\" = [...]`)".into()))?;
    let best_path = cfg.out.join(BEST_CONFIG);
    if let Some(s) = fresh(&best_path, overwrite) {
        return Ok(s);
    }
    let table_path = cfg.out.join(GRID_TABLE);
    let mut rows = match fs::read_to_string(&table_path) {
        Ok(text) if !overwrite => parse_grid_table(&text)?,
        Ok(_) => Vec::new(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let (ds, bounds) = prepare_data(cfg)?;
    echo_config(cfg)?;
    let prior = rows.clone();
    let result = grid_search(
        spec,
        &prior,
        |p| score_point(cfg, &ds, &bounds, p),
        cfg.grid_parallel,
        &mut |row: &GridRow| {
            rows.push(row.clone());
            rows.sort_by_key(|r| r.index);
            write_text(&table_path, &format_grid_table(&rows))
        },
    )?;
    if result.truncated > 0 {
        eprintln!(
            "grid: ran {} of {} configurations (grid.max_configs)",
            result.total - result.truncated,
            result.total
        );
    }
    let best_point = spec
        .points()
        .into_iter()
        .find(|p| p.index == result.best.index)
        .ok_or_else(|| Error::Contract("best grid row has no matching point".into()))?;
    let mut best = point_config(cfg, &best_point)?;
    best.out = cfg.out.join("best");
    best.checkpoint = None;
    train_cmd(&best, true)?;
    evaluate_cmd(&best, true)?;
    write_text(&best_path, &best.to_toml())?;
    Ok(Status::Done)
}
