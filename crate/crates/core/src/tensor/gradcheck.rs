use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

/// Denominator floor for the relative error. Coordinates where both the
/// analytic and the numeric derivative are below this magnitude are compared
/// in absolute terms against it, so an identically zero gradient passes.
pub const EPS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Max over all coordinates of `|analytic - numeric| / max(|analytic|, |numeric|, EPS_FLOOR)`.
    pub max_rel_error: f64,
    /// (input index, flat coordinate) where the maximum occurred.
    pub worst: (usize, usize),
    pub tolerance: f64,
    pub coordinates: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(EPS_FLOOR);
    (analytic - numeric).abs() / denom
}

fn scalar_value<F>(f: &F, points: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars = points
        .iter()
        .map(|p| g.constant(p.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = f(&mut g, &vars)?;
    g.value(out).item()
}

/// Compares reverse-mode gradients of a scalar function of several tensors
/// with central finite differences of width `2 * step`.
pub fn grad_check_many<F>(f: F, points: &[Tensor], step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::Contract(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }

    let first = scalar_value(&f, points)?;
    let second = scalar_value(&f, points)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic {
            diff: (first - second).abs(),
        });
    }

    let mut g = Graph::new();
    let vars = points.iter().map(|p| g.param(p.clone())).collect::<Result<Vec<_>>>()?;
    let out = f(&mut g, &vars)?;
    let grads = g.backward(out)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        tolerance,
        coordinates: 0,
    };
    let mut shifted: Vec<Tensor> = points.to_vec();
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var).expect("param leaf has a gradient").clone();
        for k in 0..points[pi].len() {
            let base = points[pi].data()[k];
            shifted[pi].data_mut()[k] = base + step;
            let plus = scalar_value(&f, &shifted)?;
            shifted[pi].data_mut()[k] = base - step;
            let minus = scalar_value(&f, &shifted)?;
            shifted[pi].data_mut()[k] = base;

            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic.data()[k], numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (pi, k);
            }
            report.coordinates += 1;
        }
    }
    Ok(report)
}

/// Single-input form of [`grad_check_many`].
pub fn grad_check<F>(f: F, point: &Tensor, step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    grad_check_many(|g, vars| f(g, vars[0]), std::slice::from_ref(point), step, tolerance)
}
