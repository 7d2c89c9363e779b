use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{assemble_batch, windowize, Part, SplitBounds, TimeSeriesDataset, WindowSample};
use crate::error::{Error, Result};
use crate::eval::{corr, rse};
use crate::model::{l2_regularize_ar, loss, LstNetModel};
use crate::optim::{clip_global_norm, sgd_step, AdamState};
use crate::tensor::{Graph, Tensor};

/// Samples per forward pass when only predictions are needed.
const PREDICT_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::Config(format!(
                "unknown optimizer `{other}` (expected adam or sgd)"
            ))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub lr: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip: Option<f64>,
    pub optimizer: OptimizerKind,
    /// Coefficient of the `‖W_ar‖²` penalty added to every mini-batch loss.
    pub ar_l2: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 100,
            batch_size: 128,
            patience: 10,
            lr: 1e-3,
            clip: Some(10.0),
            optimizer: OptimizerKind::Adam,
            ar_l2: 0.0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.lr
            )));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip norm must be positive, got {c}")));
            }
        }
        if !(self.ar_l2 >= 0.0) || !self.ar_l2.is_finite() {
            return Err(Error::Config(format!(
                "ar_l2 must be finite and non-negative, got {}",
                self.ar_l2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Data loss summed over the epoch, divided by the number of samples.
    pub train_loss: f64,
    pub valid_rse: f64,
    pub valid_corr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EpochCap,
    Patience,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::EpochCap => "epoch cap reached",
            StopReason::Patience => "patience exhausted",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_rse: f64,
    pub stop: StopReason,
    /// Weights from `best_epoch`.
    pub model: LstNetModel,
}

/// Data loss (without penalty) and gradients of loss plus AR penalty, in
/// parameter-store order, for one mini-batch.
pub fn batch_gradients(
    model: &LstNetModel,
    dataset: &TimeSeriesDataset,
    samples: &[WindowSample],
    ar_l2: f64,
    rng: Option<&mut dyn RngCore>,
) -> Result<(f64, Vec<Tensor>)> {
    let (batch, targets) = assemble_batch(dataset, samples, model.config().window)?;
    let mut g = Graph::new();
    let bound = model.params().bind(&mut g)?;
    let pred = model.forward(&mut g, &bound, &batch, rng)?;
    let target = g.constant(targets)?;
    let data_loss = loss(&mut g, model.config().loss, pred, target)?;
    let value = g.value(data_loss).item()?;
    let objective = match l2_regularize_ar(&mut g, model, &bound, ar_l2)? {
        Some(pen) => g.add(data_loss, pen)?,
        None => data_loss,
    };
    let vars = bound.vars().to_vec();
    let mut grads = g.backward(objective)?;
    let out = vars
        .into_iter()
        .map(|v| grads.take(v).expect("every parameter is a trainable leaf"))
        .collect();
    Ok((value, out))
}

/// Inference-mode predictions for `samples`, flattened `[samples, width]`.
pub(crate) fn predict_samples(
    model: &LstNetModel,
    dataset: &TimeSeriesDataset,
    samples: &[WindowSample],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.len() * dataset.width());
    for chunk in samples.chunks(PREDICT_CHUNK) {
        let (batch, _) = assemble_batch(dataset, chunk, model.config().window)?;
        out.extend_from_slice(model.predict(&batch)?.data());
    }
    Ok(out)
}

pub fn train(
    model: LstNetModel,
    dataset: &TimeSeriesDataset,
    bounds: &SplitBounds,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<TrainRun> {
    train_with_observer(model, dataset, bounds, schedule, seed, &mut |_| {})
}

/// Trains with mini-batch updates, evaluating validation RSE/CORR after
/// every epoch and keeping the weights with the lowest validation RSE.
///
/// Window order is reshuffled every epoch from a generator seeded with
/// `seed`; the same generator drives dropout, so runs are bitwise
/// reproducible. `observer` sees each epoch record as it completes.
pub fn train_with_observer(
    mut model: LstNetModel,
    dataset: &TimeSeriesDataset,
    bounds: &SplitBounds,
    schedule: &TrainSchedule,
    seed: u64,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainRun> {
    schedule.validate()?;
    if dataset.width() != model.width() {
        return Err(Error::Data(format!(
            "model expects {} variables, dataset has {}",
            model.width(),
            dataset.width()
        )));
    }
    let (q, h) = (model.config().window, model.config().horizon);
    let train_samples = windowize(dataset, q, h, bounds, Part::Train)?;
    if train_samples.is_empty() {
        return Err(Error::Data(format!(
            "training split ({} rows) yields no windows for window {q} and horizon {h}",
            bounds.range(Part::Train).len()
        )));
    }
    let valid_samples = windowize(dataset, q, h, bounds, Part::Valid)?;
    if valid_samples.is_empty() {
        return Err(Error::Data(
            "validation split yields no windows; model selection needs at least one".into(),
        ));
    }
    let valid_truth: Vec<f64> = valid_samples
        .iter()
        .flat_map(|s| dataset.row(s.target).to_vec())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = AdamState::new(model.params(), schedule.lr);
    let dropout_on = model.config().dropout > 0.0;

    let mut order: Vec<usize> = (0..train_samples.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, LstNetModel)> = None;
    let mut stale = 0;
    let mut stop = StopReason::EpochCap;

    for epoch in 1..=schedule.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(schedule.batch_size) {
            let batch: Vec<WindowSample> = idx.iter().map(|&i| train_samples[i]).collect();
            let drop_rng: Option<&mut dyn RngCore> = if dropout_on { Some(&mut rng) } else { None };
            let (value, mut grads) =
                batch_gradients(&model, dataset, &batch, schedule.ar_l2, drop_rng).map_err(|e| match e {
                    Error::NonFinite { op } => Error::Diverged {
                        epoch,
                        detail: format!("non-finite value in {op}"),
                    },
                    other => other,
                })?;
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("training loss became {value}"),
                });
            }
            total += value;
            if let Some(c) = schedule.clip {
                clip_global_norm(&mut grads, c);
            }
            let applied = match schedule.optimizer {
                OptimizerKind::Adam => adam.step(model.params_mut(), &grads),
                OptimizerKind::Sgd => sgd_step(schedule.lr, model.params_mut(), &grads),
            };
            applied.map_err(|e| match e {
                Error::NonFiniteGradient { param } => Error::Diverged {
                    epoch,
                    detail: format!("non-finite gradient for `{param}`"),
                },
                other => other,
            })?;
        }

        let pred = predict_samples(&model, dataset, &valid_samples).map_err(|e| match e {
            Error::NonFinite { op } => Error::Diverged {
                epoch,
                detail: format!("non-finite value in {op} during validation"),
            },
            other => other,
        })?;
        if pred.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                detail: "non-finite validation prediction".into(),
            });
        }
        let valid_rse = rse(&valid_truth, &pred)?;
        // A constant prediction has no correlation; record it as NaN rather than abort.
        let valid_corr = corr(&valid_truth, &pred, dataset.width())
            .map(|c| c.mean)
            .unwrap_or(f64::NAN);
        let record = EpochRecord {
            epoch,
            train_loss: total / train_samples.len() as f64,
            valid_rse,
            valid_corr,
            seconds: started.elapsed().as_secs_f64(),
        };
        observer(&record);
        history.push(record);

        if best.as_ref().is_none_or(|(_, r, _)| valid_rse < *r) {
            best = Some((epoch, valid_rse, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= schedule.patience {
                stop = StopReason::Patience;
                break;
            }
        }
    }

    let (best_epoch, best_valid_rse, model) = best.expect("at least one epoch ran");
    Ok(TrainRun {
        history,
        best_epoch,
        best_valid_rse,
        stop,
        model,
    })
}

/// Tab-separated log with a header line and one line per epoch.
pub fn format_training_log(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch\ttrain_loss\tvalid_rse\tvalid_corr\tseconds\n");
    for r in history {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.3}\n",
            r.epoch, r.train_loss, r.valid_rse, r.valid_corr, r.seconds
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SplitSpec;
    use crate::model::{LstNetConfig, Variant};

    fn ar2_dataset(len: usize) -> TimeSeriesDataset {
        // x_t = 1.618 x_{t-1} − x_{t-2}: a pure sinusoid of period 10.
        let mut x = vec![0.0, 0.5];
        while x.len() < len {
            let k = x.len();
            x.push(1.618 * x[k - 1] - x[k - 2]);
        }
        TimeSeriesDataset::univariate("ar2", x).unwrap()
    }

    fn ar_only(window: usize) -> LstNetConfig {
        LstNetConfig {
            window,
            horizon: 1,
            ar_window: 2,
            dropout: 0.0,
            variant: Variant::ArOnly,
            ..Default::default()
        }
    }

    #[test]
    fn ar_only_recovers_generating_weights() {
        let ds = ar2_dataset(400);
        let bounds = SplitSpec::default().resolve(ds.len()).unwrap();
        let schedule = TrainSchedule {
            epochs: 300,
            batch_size: 32,
            patience: 300,
            lr: 0.01,
            ..Default::default()
        };
        let model = LstNetModel::new(ar_only(4), 1, 3).unwrap();
        let run = train(model, &ds, &bounds, &schedule, 3).unwrap();
        let w = run.model.params().get("ar.weight").unwrap().data().to_vec();
        assert!((w[0] - 1.618).abs() < 1e-2 && (w[1] + 1.0).abs() < 1e-2, "{w:?}");
        assert!(run.history.last().unwrap().train_loss < 1e-4);
    }

    #[test]
    fn zero_learning_rate_freezes_everything() {
        let ds = ar2_dataset(200);
        let bounds = SplitSpec::default().resolve(ds.len()).unwrap();
        let model = LstNetModel::new(ar_only(4), 1, 1).unwrap();
        let schedule = TrainSchedule {
            epochs: 4,
            lr: 0.0,
            patience: 10,
            ..Default::default()
        };
        let run = train(model.clone(), &ds, &bounds, &schedule, 1).unwrap();
        assert_eq!(run.model, model);
        // Shuffling changes only the summation order.
        let first = run.history[0].train_loss;
        assert!(run
            .history
            .iter()
            .all(|r| (r.train_loss - first).abs() <= 1e-12 * first));
        assert!(run.history.iter().all(|r| r.valid_rse == run.history[0].valid_rse));
    }

    #[test]
    fn patience_stops_early_and_best_is_min() {
        let ds = ar2_dataset(200);
        let bounds = SplitSpec::default().resolve(ds.len()).unwrap();
        let schedule = TrainSchedule {
            epochs: 50,
            lr: 0.0,
            patience: 2,
            ..Default::default()
        };
        let run = train(LstNetModel::new(ar_only(4), 1, 1).unwrap(), &ds, &bounds, &schedule, 1).unwrap();
        assert_eq!(run.stop, StopReason::Patience);
        assert_eq!(run.history.len(), 3);
        let min = run.history.iter().map(|r| r.valid_rse).fold(f64::INFINITY, f64::min);
        assert_eq!(run.best_valid_rse, min);
    }

    #[test]
    fn empty_training_split_is_an_error() {
        let ds = ar2_dataset(20);
        let bounds = SplitSpec::default().resolve(ds.len()).unwrap();
        let model = LstNetModel::new(ar_only(12), 1, 1).unwrap();
        let err = train(model, &ds, &bounds, &TrainSchedule::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }

    #[test]
    fn divergence_reports_epoch() {
        let ds = ar2_dataset(200);
        let bounds = SplitSpec::default().resolve(ds.len()).unwrap();
        let schedule = TrainSchedule {
            epochs: 500,
            patience: 500,
            lr: 10.0,
            clip: None,
            optimizer: OptimizerKind::Sgd,
            ..Default::default()
        };
        let err = train(LstNetModel::new(ar_only(4), 1, 1).unwrap(), &ds, &bounds, &schedule, 1).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn log_has_one_line_per_epoch() {
        let rec = EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            valid_rse: 0.25,
            valid_corr: 0.9,
            seconds: 0.0,
        };
        let log = format_training_log(&[rec.clone(), EpochRecord { epoch: 2, ..rec }]);
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "1\t0.5\t0.25\t0.9\t0.000");
    }
}
