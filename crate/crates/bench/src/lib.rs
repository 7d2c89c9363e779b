//! Seeded fixtures shared by the criterion benchmarks.

use lstnet_core::data::TimeSeriesDataset;
use lstnet_core::model::WindowBatch;
use lstnet_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-1, 1)`.
pub fn random_tensor(r: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..len).map(|_| r.random_range(-1.0..1.0)).collect()).expect("shape matches data")
}

pub fn random_batch(r: &mut ChaCha8Rng, samples: usize, window: usize, width: usize) -> WindowBatch {
    let mut b = WindowBatch::new(window, width);
    for _ in 0..samples {
        b.push(random_tensor(r, &[window * width]).data())
            .expect("row length matches");
    }
    b
}

/// `width` noisy daily-periodic series of `len` hourly steps.
pub fn seasonal_dataset(r: &mut ChaCha8Rng, len: usize, width: usize) -> TimeSeriesDataset {
    let cols: Vec<Vec<f64>> = (0..width)
        .map(|i| {
            (0..len)
                .map(|t| {
                    let phase = 2.0 * std::f64::consts::PI * (t + 3 * i) as f64 / 24.0;
                    2.0 + phase.sin() + 0.1 * r.random_range(-1.0..1.0)
                })
                .collect()
        })
        .collect();
    TimeSeriesDataset::from_columns("seasonal", &cols).expect("columns have equal length")
}
