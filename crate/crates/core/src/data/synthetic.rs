//! Autoregressive series whose noise mean steps up at regular intervals.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of discarded warm-up samples per unit of AR order.
pub const BURN_IN_PER_ORDER: usize = 10;

const MAX_WEIGHT_DRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleShiftSpec {
    /// AR order.
    pub order: usize,
    /// Steps between noise-mean increments.
    pub period: usize,
    /// Increment of the noise mean per period.
    pub mu0: f64,
    pub length: usize,
    pub seed: u64,
    /// Fixed coefficients; drawn from `N(0, I)` when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleShiftSeries {
    pub values: Vec<f64>,
    /// `w_1..w_p`, where `w_i` multiplies `x_{t-i}`.
    pub weights: Vec<f64>,
    pub burn_in: usize,
    /// How many weight vectors were drawn before a stationary one was found.
    pub weight_draws: usize,
}

/// Spectral radius of the AR companion matrix.
pub fn companion_spectral_radius(weights: &[f64]) -> f64 {
    let p = weights.len();
    if p == 0 {
        return 0.0;
    }
    let mut m = DMatrix::<f64>::zeros(p, p);
    for (i, &w) in weights.iter().enumerate() {
        m[(0, i)] = w;
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `x_t = Σ_i w_i x_{t-i} + ε_t` with `ε_t ~ N(⌊t / period⌋ · mu0, 1)`.
///
/// Drawn weights are redrawn until the process is stationary (companion
/// spectral radius below one); the count of draws is reported. The first
/// `BURN_IN_PER_ORDER * order` samples are generated with the block-0 noise
/// mean and discarded, so `values[0]` is at `t = 0`.
pub fn generate_scale_shift_ar(spec: &ScaleShiftSpec) -> Result<ScaleShiftSeries> {
    if spec.order == 0 {
        return Err(Error::Config("AR order must be at least 1".into()));
    }
    if spec.period == 0 {
        return Err(Error::Config("shift period must be positive".into()));
    }
    if spec.length <= spec.order {
        return Err(Error::Config(format!(
            "length {} must exceed the AR order {}",
            spec.length, spec.order
        )));
    }
    if !spec.mu0.is_finite() {
        return Err(Error::Config("mu0 must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let (weights, weight_draws) = match &spec.weights {
        Some(w) if w.len() != spec.order => {
            return Err(Error::Config(format!(
                "{} weights supplied for order {}",
                w.len(),
                spec.order
            )))
        }
        Some(w) => (w.clone(), 0),
        None => {
            let mut draws = 0;
            loop {
                draws += 1;
                let w: Vec<f64> = (0..spec.order).map(|_| StandardNormal.sample(&mut rng)).collect();
                if companion_spectral_radius(&w) < 1.0 {
                    break (w, draws);
                }
                if draws >= MAX_WEIGHT_DRAWS {
                    return Err(Error::Degenerate(format!(
                        "no stationary AR({}) weights in {draws} draws",
                        spec.order
                    )));
                }
            }
        }
    };

    let burn_in = BURN_IN_PER_ORDER * spec.order;
    let total = burn_in + spec.length;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x = vec![0.0; total];
    for s in 0..total {
        let t = s.saturating_sub(burn_in);
        let mean = (t / spec.period) as f64 * spec.mu0;
        let mut v = mean + unit.sample(&mut rng);
        for (i, w) in weights.iter().enumerate() {
            if s > i {
                v += w * x[s - 1 - i];
            }
        }
        if !v.is_finite() {
            return Err(Error::NonFinite {
                op: "generate_scale_shift_ar",
            });
        }
        x[s] = v;
    }
    Ok(ScaleShiftSeries {
        values: x.split_off(burn_in),
        weights,
        burn_in,
        weight_draws,
    })
}
