use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(truth: &[f64], pred: &[f64], width: usize, op: &'static str) -> Result<usize> {
    if truth.len() != pred.len() {
        return Err(Error::Shape {
            op,
            detail: format!("truth has {} values, prediction {}", truth.len(), pred.len()),
        });
    }
    if width == 0 || !truth.len().is_multiple_of(width) {
        return Err(Error::Shape {
            op,
            detail: format!("{} values do not form rows of width {width}", truth.len()),
        });
    }
    if truth.is_empty() {
        return Err(Error::Data(format!("{op} of an empty set")));
    }
    Ok(truth.len() / width)
}

/// Root relative squared error: `‖Y − Ŷ‖ / ‖Y − mean(Y)‖`, with the mean
/// taken over every entry. Inputs are time-major rows of equal length.
pub fn rse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred, 1, "rse")?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let num: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum();
    let den: f64 = truth.iter().map(|y| (y - mean) * (y - mean)).sum();
    if !(den > 0.0) {
        return Err(Error::Degenerate(
            "truth is globally constant, RSE denominator is zero".into(),
        ));
    }
    Ok(num.sqrt() / den.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrReport {
    /// Mean over the included variables.
    pub mean: f64,
    /// Pearson correlation per variable; `None` where either row is constant.
    pub per_variable: Vec<Option<f64>>,
    pub excluded: usize,
}

/// Mean per-variable Pearson correlation between truth and prediction.
/// `truth` and `pred` are time-major `[T, width]` row-major buffers.
pub fn corr(truth: &[f64], pred: &[f64], width: usize) -> Result<CorrReport> {
    let steps = check_pair(truth, pred, width, "corr")?;
    let mut per_variable = Vec::with_capacity(width);
    for var in 0..width {
        let y = |t: usize| truth[t * width + var];
        let p = |t: usize| pred[t * width + var];
        let my = (0..steps).map(y).sum::<f64>() / steps as f64;
        let mp = (0..steps).map(p).sum::<f64>() / steps as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for t in 0..steps {
            let (a, b) = (y(t) - my, p(t) - mp);
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
        }
        per_variable.push(if sxx > 0.0 && syy > 0.0 {
            Some(sxy / (sxx * syy).sqrt())
        } else {
            None
        });
    }
    let included: Vec<f64> = per_variable.iter().flatten().copied().collect();
    if included.is_empty() {
        return Err(Error::Degenerate(
            "every variable has zero variance in truth or prediction".into(),
        ));
    }
    Ok(CorrReport {
        mean: included.iter().sum::<f64>() / included.len() as f64,
        excluded: width - included.len(),
        per_variable,
    })
}

/// Mean squared error over every entry.
pub fn mse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred, 1, "mse")?;
    Ok(truth.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum::<f64>() / truth.len() as f64)
}
