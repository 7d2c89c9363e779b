#![allow(dead_code)]

use lstnet_core::model::{LstNetConfig, Variant, WindowBatch};
use lstnet_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// The reference toy instance: n = 2, q = 8, ω = 3, p = 2, d_r = d_s = 4.
pub fn toy_config(variant: Variant) -> LstNetConfig {
    LstNetConfig {
        window: 8,
        horizon: 1,
        conv_width: 3,
        conv_filters: 4,
        rnn_hidden: 4,
        skip_hidden: 4,
        skip: 2,
        ar_window: 3,
        dropout: 0.0,
        variant,
        attn_hidden: 4,
        ..Default::default()
    }
}

pub fn random_batch(rng: &mut ChaCha8Rng, samples: usize, window: usize, width: usize) -> WindowBatch {
    let mut b = WindowBatch::new(window, width);
    for _ in 0..samples {
        b.push(uniform(rng, &[window * width], 1.0).data()).unwrap();
    }
    b
}
