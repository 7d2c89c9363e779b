//! Training objectives. Both losses are sum-reductions over the batch.

use crate::error::{Error, Result};
use crate::model::{BoundParams, LossKind, LstNetModel};
use crate::tensor::{Graph, Var};

fn residual(g: &mut Graph, pred: Var, target: Var, op: &'static str) -> Result<Var> {
    if g.shape(pred) != g.shape(target) {
        return Err(Error::shape(
            op,
            format!("prediction {:?} vs target {:?}", g.shape(pred), g.shape(target)),
        ));
    }
    g.sub(target, pred)
}

/// Sum of squared errors over every sample and variable.
pub fn loss_l2(g: &mut Graph, pred: Var, target: Var) -> Result<Var> {
    let r = residual(g, pred, target, "loss_l2")?;
    let sq = g.square(r)?;
    g.sum(sq)
}

/// Sum of absolute errors over every sample and variable.
pub fn loss_l1(g: &mut Graph, pred: Var, target: Var) -> Result<Var> {
    let r = residual(g, pred, target, "loss_l1")?;
    let a = g.abs(r)?;
    g.sum(a)
}

pub fn loss(g: &mut Graph, kind: LossKind, pred: Var, target: Var) -> Result<Var> {
    match kind {
        LossKind::L2 => loss_l2(g, pred, target),
        LossKind::L1 => loss_l1(g, pred, target),
    }
}

/// `coefficient · ‖W_ar‖²`, or `None` when the model has no AR highway or
/// the coefficient is zero.
pub fn l2_regularize_ar(
    g: &mut Graph,
    model: &LstNetModel,
    bound: &BoundParams,
    coefficient: f64,
) -> Result<Option<Var>> {
    if !(coefficient >= 0.0) || !coefficient.is_finite() {
        return Err(Error::Config(format!(
            "AR regularization coefficient must be a finite non-negative number, got {coefficient}"
        )));
    }
    if !model.config().variant.has_ar() || coefficient == 0.0 {
        return Ok(None);
    }
    let w = bound.var("ar.weight")?;
    let sq = g.square(w)?;
    let s = g.sum(sq)?;
    Ok(Some(g.scale(s, coefficient)?))
}

/// Plain-value form of the AR penalty.
pub fn ar_penalty(model: &LstNetModel, coefficient: f64) -> Result<f64> {
    if !(coefficient >= 0.0) || !coefficient.is_finite() {
        return Err(Error::Config(format!(
            "AR regularization coefficient must be a finite non-negative number, got {coefficient}"
        )));
    }
    Ok(match model.params().get("ar.weight") {
        Some(w) if model.config().variant.has_ar() => coefficient * w.sum_squares(),
        _ => 0.0,
    })
}
