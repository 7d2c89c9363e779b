use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{LinearKind, LinearModel};
use crate::data::{windowize, Part, SplitBounds, TimeSeriesDataset, WindowSample};
use crate::error::{Error, Result};
use crate::eval::{corr, rse};
use crate::model::{LstNetModel, WindowBatch};

/// Windows per call to [`Forecaster::predict_batch`].
const EVAL_CHUNK: usize = 512;

/// Anything that maps an input window to a forecast row.
pub trait Forecaster {
    fn method(&self) -> String;
    fn window(&self) -> usize;
    fn horizon(&self) -> usize;
    fn width(&self) -> usize;
    fn param_count(&self) -> usize;
    /// One `width`-row per window, flattened.
    fn predict_batch(&self, batch: &WindowBatch) -> Result<Vec<f64>>;
}

impl Forecaster for LstNetModel {
    fn method(&self) -> String {
        format!("lstnet-{}", self.config().variant)
    }
    fn window(&self) -> usize {
        self.config().window
    }
    fn horizon(&self) -> usize {
        self.config().horizon
    }
    fn width(&self) -> usize {
        LstNetModel::width(self)
    }
    fn param_count(&self) -> usize {
        LstNetModel::param_count(self)
    }
    fn predict_batch(&self, batch: &WindowBatch) -> Result<Vec<f64>> {
        Ok(self.predict(batch)?.into_data())
    }
}

impl Forecaster for LinearModel {
    fn method(&self) -> String {
        match self.kind {
            LinearKind::Ridge => "ridge".into(),
            LinearKind::UnivariateAr => "ar".into(),
        }
    }
    fn window(&self) -> usize {
        self.window
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn width(&self) -> usize {
        self.width
    }
    fn param_count(&self) -> usize {
        LinearModel::param_count(self)
    }
    fn predict_batch(&self, batch: &WindowBatch) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(batch.len() * self.width);
        for s in 0..batch.len() {
            out.extend(self.predict_linear(batch.sample(s))?);
        }
        Ok(out)
    }
}

/// Scale on which metrics and traces are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricScale {
    /// The scale the model sees (after normalization).
    #[default]
    Normalized,
    /// Normalization factors multiplied back in.
    Raw,
}

impl FromStr for MetricScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(MetricScale::Normalized),
            "raw" => Ok(MetricScale::Raw),
            other => Err(Error::Config(format!(
                "unknown metric scale `{other}` (expected normalized or raw)"
            ))),
        }
    }
}

impl fmt::Display for MetricScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricScale::Normalized => "normalized",
            MetricScale::Raw => "raw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Target row index.
    pub t: usize,
    pub variable: usize,
    pub truth: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub dataset: String,
    pub part: String,
    pub horizon: usize,
    pub scale: MetricScale,
    pub rse: f64,
    pub corr: f64,
    pub per_variable_corr: Vec<Option<f64>>,
    pub excluded_vars: usize,
    pub samples: usize,
    pub runtime_seconds: f64,
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

pub fn rolling_evaluate(
    model: &dyn Forecaster,
    dataset: &TimeSeriesDataset,
    bounds: &SplitBounds,
    part: Part,
    scale: MetricScale,
) -> Result<EvalReport> {
    rolling_evaluate_audited(model, dataset, bounds, part, scale, &mut |_, _| {})
}

/// Predicts every eligible target of `part` from the window ending at its
/// anchor, then scores the whole part.
///
/// `audit` receives each sample together with the inclusive row range the
/// model is given; that range never extends past the anchor.
pub fn rolling_evaluate_audited(
    model: &dyn Forecaster,
    dataset: &TimeSeriesDataset,
    bounds: &SplitBounds,
    part: Part,
    scale: MetricScale,
    audit: &mut dyn FnMut(&WindowSample, RangeInclusive<usize>),
) -> Result<EvalReport> {
    let started = Instant::now();
    let n = dataset.width();
    if model.width() != n {
        return Err(Error::Data(format!(
            "model forecasts {} variables, dataset has {n}",
            model.width()
        )));
    }
    let q = model.window();
    let samples = windowize(dataset, q, model.horizon(), bounds, part)?;
    if samples.is_empty() {
        return Err(Error::Data(format!("{part} part yields no windows for window {q}")));
    }

    let mut pred = Vec::with_capacity(samples.len() * n);
    for chunk in samples.chunks(EVAL_CHUNK) {
        let mut batch = WindowBatch::new(q, n);
        for s in chunk {
            audit(s, s.first_row(q)..=s.anchor);
            batch.push(dataset.window(s.anchor, q))?;
        }
        pred.extend(model.predict_batch(&batch)?);
    }
    let mut truth: Vec<f64> = samples.iter().flat_map(|s| dataset.row(s.target).to_vec()).collect();
    if scale == MetricScale::Raw {
        let f = dataset.scales();
        for (k, (y, p)) in truth.iter_mut().zip(pred.iter_mut()).enumerate() {
            *y *= f[k % n];
            *p *= f[k % n];
        }
    }
    if pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op: "rolling_evaluate" });
    }

    let rse = rse(&truth, &pred)?;
    let c = corr(&truth, &pred, n)?;
    let trace = samples
        .iter()
        .enumerate()
        .flat_map(|(k, s)| {
            let (truth, pred) = (&truth, &pred);
            (0..n).map(move |v| TracePoint {
                t: s.target,
                variable: v,
                truth: truth[k * n + v],
                prediction: pred[k * n + v],
            })
        })
        .collect();
    Ok(EvalReport {
        method: model.method(),
        dataset: dataset.name().to_string(),
        part: part.to_string(),
        horizon: model.horizon(),
        scale,
        rse,
        corr: c.mean,
        per_variable_corr: c.per_variable,
        excluded_vars: c.excluded,
        samples: samples.len(),
        runtime_seconds: started.elapsed().as_secs_f64(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SplitSpec;

    fn periodic(len: usize, period: usize) -> TimeSeriesDataset {
        let cols = vec![
            (0..len).map(|t| ((t % period) as f64).sin()).collect(),
            (0..len).map(|t| (t % period) as f64).collect(),
        ];
        TimeSeriesDataset::from_columns("periodic", &cols).unwrap()
    }

    #[test]
    fn persistence_on_constant_series_is_degenerate() {
        let ds = TimeSeriesDataset::univariate("c", vec![2.0; 60]).unwrap();
        let bounds = SplitSpec::default().resolve(60).unwrap();
        let err = rolling_evaluate(
            &LinearModel::persistence(1, 1),
            &ds,
            &bounds,
            Part::Test,
            MetricScale::Normalized,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn persistence_at_a_whole_period_is_exact() {
        let ds = periodic(300, 12);
        let bounds = SplitSpec::default().resolve(300).unwrap();
        let r = rolling_evaluate(
            &LinearModel::persistence(2, 24),
            &ds,
            &bounds,
            Part::Test,
            MetricScale::Normalized,
        )
        .unwrap();
        assert_eq!(r.rse, 0.0);
        assert!((r.corr - 1.0).abs() < 1e-12);
        assert_eq!(r.samples, 60);
        assert_eq!(r.trace.len(), 120);
    }

    #[test]
    fn inputs_never_pass_the_anchor() {
        let ds = periodic(200, 7);
        let bounds = SplitSpec::default().resolve(200).unwrap();
        let model = LinearModel::persistence(2, 3);
        let mut seen = 0;
        rolling_evaluate_audited(
            &model,
            &ds,
            &bounds,
            Part::Valid,
            MetricScale::Normalized,
            &mut |s, rows| {
                assert!(*rows.end() <= s.anchor && s.anchor < s.target);
                assert!(bounds.range(Part::Valid).contains(&s.target));
                seen += 1;
            },
        )
        .unwrap();
        assert_eq!(seen, 40);
    }

    #[test]
    fn raw_scale_multiplies_factors_back() {
        let raw = periodic(200, 7);
        let bounds = SplitSpec::default().resolve(200).unwrap();
        let norm = raw
            .normalize(crate::data::Normalization::Max, bounds.train_end)
            .unwrap();
        let model = LinearModel::persistence(2, 1);
        let a = rolling_evaluate(&model, &norm, &bounds, Part::Test, MetricScale::Raw).unwrap();
        let b = rolling_evaluate(&model, &raw, &bounds, Part::Test, MetricScale::Normalized).unwrap();
        assert!((a.rse - b.rse).abs() < 1e-12);
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert!((x.truth - y.truth).abs() < 1e-12);
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let ds = periodic(100, 5);
        let bounds = SplitSpec::default().resolve(100).unwrap();
        assert!(rolling_evaluate(
            &LinearModel::persistence(3, 1),
            &ds,
            &bounds,
            Part::Test,
            MetricScale::Normalized
        )
        .is_err());
    }
}
