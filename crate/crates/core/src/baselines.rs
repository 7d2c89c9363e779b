//! Closed-form linear forecasters: per-variable autoregression and ridge
//! vector autoregression over the flattened input window.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{windowize, Part, SplitBounds, TimeSeriesDataset, WindowSample};
use crate::error::{Error, Result};
use crate::model::checkpoint::{Checkpoint, ModelKind};
use crate::model::ParamStore;
use crate::tensor::Tensor;

/// Default ceiling on `width · window` for ridge VAR designs.
pub const DEFAULT_MAX_RIDGE_FEATURES: usize = 4096;

/// Smallest Cholesky pivot, relative to the largest, accepted as nonsingular.
/// Exactly collinear designs leave pivots near `√ε` after rounding.
const SINGULAR_PIVOT: f64 = 1e-7;

/// Solution of a multi-output ridge regression with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    /// `[features, outputs]`.
    pub coefficients: DMatrix<f64>,
    pub intercept: Vec<f64>,
    pub lambda: f64,
}

/// Minimizes `‖Y − Xβ − 1bᵀ‖² + λ‖β‖²` by a direct Cholesky solve of the
/// normal equations augmented with a constant column.
///
/// `features` is `[samples, d]` and `targets` `[samples, k]`, both row-major.
pub fn fit_ridge(features: &[f64], targets: &[f64], samples: usize, lambda: f64) -> Result<RidgeFit> {
    if samples == 0 {
        return Err(Error::Data("ridge fit needs at least one sample".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!(
            "ridge λ must be finite and non-negative, got {lambda}"
        )));
    }
    if !features.len().is_multiple_of(samples) || !targets.len().is_multiple_of(samples) {
        return Err(Error::shape(
            "fit_ridge",
            format!(
                "{} features / {} targets do not split into {samples} rows",
                features.len(),
                targets.len()
            ),
        ));
    }
    let d = features.len() / samples;
    let k = targets.len() / samples;
    let x = DMatrix::from_row_slice(samples, d, features);
    let y = DMatrix::from_row_slice(samples, k, targets);

    // [XᵀX + λI   Xᵀ1] [β]   [XᵀY]
    // [1ᵀX        N  ] [b] = [1ᵀY]
    let mut a = DMatrix::<f64>::zeros(d + 1, d + 1);
    a.view_mut((0, 0), (d, d)).copy_from(&(x.transpose() * &x));
    for i in 0..d {
        a[(i, i)] += lambda;
        let s = x.column(i).sum();
        a[(i, d)] = s;
        a[(d, i)] = s;
    }
    a[(d, d)] = samples as f64;
    let mut rhs = DMatrix::<f64>::zeros(d + 1, k);
    rhs.view_mut((0, 0), (d, k)).copy_from(&(x.transpose() * &y));
    for j in 0..k {
        rhs[(d, j)] = y.column(j).sum();
    }

    let singular = || {
        Error::Singular(format!(
            "ridge normal equations are singular at λ = {lambda}; use a positive λ or fewer features"
        ))
    };
    let chol = a.clone().cholesky().ok_or_else(singular)?;
    let l = chol.l();
    let diag: Vec<f64> = (0..=d).map(|i| l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > SINGULAR_PIVOT * max) {
        return Err(singular());
    }
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(singular());
    }
    Ok(RidgeFit {
        coefficients: sol.rows(0, d).into_owned(),
        intercept: sol.row(d).iter().copied().collect(),
        lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    /// Every output reads the full flattened `window × width` input.
    Ridge,
    /// Output `i` reads only the history of variable `i`.
    UnivariateAr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LinearMeta {
    kind: LinearKind,
    window: usize,
    horizon: usize,
    lambda: f64,
}

/// A fitted affine map from the input window to the forecast row.
///
/// Features are ordered oldest first: for `Ridge` feature `t·width + j` is
/// variable `j` at window position `t`; for `UnivariateAr` column `i` of
/// the `[window, width]` coefficient matrix holds variable `i`'s lag
/// weights, row `window − 1` being the most recent observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub window: usize,
    pub horizon: usize,
    pub width: usize,
    pub lambda: f64,
    pub coefficients: Tensor,
    pub intercept: Vec<f64>,
}

fn training_samples(
    ds: &TimeSeriesDataset,
    bounds: &SplitBounds,
    window: usize,
    horizon: usize,
) -> Result<Vec<WindowSample>> {
    let samples = windowize(ds, window, horizon, bounds, Part::Train)?;
    if samples.is_empty() {
        return Err(Error::Data(format!(
            "training split yields no windows for window {window} and horizon {horizon}"
        )));
    }
    Ok(samples)
}

/// Ridge VAR over the flattened window, fitted on the training part.
pub fn fit_ridge_var(
    ds: &TimeSeriesDataset,
    bounds: &SplitBounds,
    window: usize,
    horizon: usize,
    lambda: f64,
    max_features: usize,
) -> Result<LinearModel> {
    let n = ds.width();
    let d = n * window;
    if d > max_features {
        return Err(Error::Config(format!(
            "ridge design has {n}×{window} = {d} features, above the cap of {max_features}; reduce the window"
        )));
    }
    let samples = training_samples(ds, bounds, window, horizon)?;
    let mut x = Vec::with_capacity(samples.len() * d);
    let mut y = Vec::with_capacity(samples.len() * n);
    for s in &samples {
        x.extend_from_slice(ds.window(s.anchor, window));
        y.extend_from_slice(ds.row(s.target));
    }
    let fit = fit_ridge(&x, &y, samples.len(), lambda)?;
    let coeffs: Vec<f64> = (0..d)
        .flat_map(|r| fit.coefficients.row(r).iter().copied().collect::<Vec<_>>())
        .collect();
    Ok(LinearModel {
        kind: LinearKind::Ridge,
        window,
        horizon,
        width: n,
        lambda,
        coefficients: Tensor::new(vec![d, n], coeffs)?,
        intercept: fit.intercept,
    })
}

/// One independent ridge autoregression of the given order per variable.
/// Variables are fitted in parallel.
pub fn fit_univariate_ar(
    ds: &TimeSeriesDataset,
    bounds: &SplitBounds,
    order: usize,
    horizon: usize,
    lambda: f64,
) -> Result<LinearModel> {
    let n = ds.width();
    let samples = training_samples(ds, bounds, order, horizon)?;
    let fits: Vec<RidgeFit> = (0..n)
        .into_par_iter()
        .map(|var| {
            let mut x = Vec::with_capacity(samples.len() * order);
            let mut y = Vec::with_capacity(samples.len());
            for s in &samples {
                x.extend((s.first_row(order)..=s.anchor).map(|t| ds.get(t, var)));
                y.push(ds.get(s.target, var));
            }
            fit_ridge(&x, &y, samples.len(), lambda)
        })
        .collect::<Result<_>>()?;
    let mut coeffs = vec![0.0; order * n];
    for (var, fit) in fits.iter().enumerate() {
        for lag in 0..order {
            coeffs[lag * n + var] = fit.coefficients[(lag, 0)];
        }
    }
    Ok(LinearModel {
        kind: LinearKind::UnivariateAr,
        window: order,
        horizon,
        width: n,
        lambda,
        coefficients: Tensor::new(vec![order, n], coeffs)?,
        intercept: fits.iter().map(|f| f.intercept[0]).collect(),
    })
}

impl LinearModel {
    /// Forecasts the last observed value.
    pub fn persistence(width: usize, horizon: usize) -> Self {
        LinearModel {
            kind: LinearKind::UnivariateAr,
            window: 1,
            horizon,
            width,
            lambda: 0.0,
            coefficients: Tensor::ones(vec![1, width]),
            intercept: vec![0.0; width],
        }
    }

    pub fn param_count(&self) -> usize {
        self.coefficients.len() + self.intercept.len()
    }

    /// Predicts one row from a `window × width` row-major window.
    pub fn predict_linear(&self, window: &[f64]) -> Result<Vec<f64>> {
        let n = self.width;
        if window.len() != self.window * n {
            return Err(Error::shape(
                "predict_linear",
                format!("window needs {}x{} values, got {}", self.window, n, window.len()),
            ));
        }
        let c = self.coefficients.data();
        let mut out = self.intercept.clone();
        match self.kind {
            LinearKind::Ridge => {
                for (f, &x) in window.iter().enumerate() {
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += x * c[f * n + j];
                    }
                }
            }
            LinearKind::UnivariateAr => {
                for (f, &x) in window.iter().enumerate() {
                    out[f % n] += x * c[f];
                }
            }
        }
        Ok(out)
    }

    pub fn to_checkpoint(&self, scales: &[f64], seed: u64) -> Result<Checkpoint> {
        let meta = LinearMeta {
            kind: self.kind,
            window: self.window,
            horizon: self.horizon,
            lambda: self.lambda,
        };
        let mut params = ParamStore::new();
        params.insert("linear.coefficients", self.coefficients.clone());
        params.insert("linear.intercept", Tensor::vector(self.intercept.clone()));
        Ok(Checkpoint {
            kind: match self.kind {
                LinearKind::Ridge => ModelKind::Ridge,
                LinearKind::UnivariateAr => ModelKind::UnivariateAr,
            },
            seed,
            width: self.width,
            config_json: serde_json::to_string(&meta).map_err(|e| Error::Checkpoint(e.to_string()))?,
            scales: scales.to_vec(),
            params,
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let expected = match ck.kind {
            ModelKind::Ridge => LinearKind::Ridge,
            ModelKind::UnivariateAr => LinearKind::UnivariateAr,
            ModelKind::Neural => {
                return Err(Error::Checkpoint(
                    "expected a linear checkpoint, found a neural one".into(),
                ))
            }
        };
        let meta: LinearMeta = serde_json::from_str(&ck.config_json)
            .map_err(|e| Error::Checkpoint(format!("bad linear model metadata: {e}")))?;
        if meta.kind != expected {
            return Err(Error::Checkpoint("kind tag disagrees with metadata".into()));
        }
        let get = |name: &str| {
            ck.params
                .get(name)
                .cloned()
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
        };
        let coefficients = get("linear.coefficients")?;
        let intercept = get("linear.intercept")?.into_data();
        let n = ck.width;
        let rows = match meta.kind {
            LinearKind::Ridge => meta.window * n,
            LinearKind::UnivariateAr => meta.window,
        };
        if coefficients.shape() != [rows, n] || intercept.len() != n {
            return Err(Error::Checkpoint(format!(
                "coefficient shape {:?} does not match window {} and width {n}",
                coefficients.shape(),
                meta.window
            )));
        }
        Ok(LinearModel {
            kind: meta.kind,
            window: meta.window,
            horizon: meta.horizon,
            width: n,
            lambda: meta.lambda,
            coefficients,
            intercept,
        })
    }
}
