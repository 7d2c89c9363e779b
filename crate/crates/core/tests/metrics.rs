//! Metrics against definitional oracles, and their invariances.

use lstnet_core::eval::{corr, rse};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Element-wise sums, truth laid out `[T, n]`.
fn rse_oracle(y: &[f64], p: &[f64]) -> f64 {
    let mut mean = 0.0;
    for v in y {
        mean += v;
    }
    mean /= y.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..y.len() {
        num += (y[k] - p[k]).powi(2);
        den += (y[k] - mean).powi(2);
    }
    (num / den).sqrt()
}

fn corr_oracle(y: &[f64], p: &[f64], n: usize) -> f64 {
    let t = y.len() / n;
    let mut total = 0.0;
    for i in 0..n {
        let row = |a: &[f64]| -> Vec<f64> { (0..t).map(|s| a[s * n + i]).collect() };
        let (a, b) = (row(y), row(p));
        let ma = a.iter().sum::<f64>() / t as f64;
        let mb = b.iter().sum::<f64>() / t as f64;
        let num: f64 = a.iter().zip(&b).map(|(x, z)| (x - ma) * (z - mb)).sum();
        let da: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let db: f64 = b.iter().map(|z| (z - mb).powi(2)).sum();
        total += num / (da * db).sqrt();
    }
    total / n as f64
}

fn instance(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..250).map(|_| r.random_range(-3.0..3.0)).collect();
    let p: Vec<f64> = y.iter().map(|v| v + r.random_range(-1.0..1.0)).collect();
    (y, p)
}

#[test]
fn random_5x50_instances_match_oracles() {
    for seed in 0..100 {
        let (y, p) = instance(seed);
        assert!((rse(&y, &p).unwrap() - rse_oracle(&y, &p)).abs() < 1e-12);
        assert!((corr(&y, &p, 5).unwrap().mean - corr_oracle(&y, &p, 5)).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn rse_is_invariant_under_global_affine_maps(seed in any::<u64>(), alpha in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], c in -100.0f64..100.0) {
        let (y, p) = instance(seed);
        let f = |v: &[f64]| v.iter().map(|x| alpha * x + c).collect::<Vec<_>>();
        let a = rse(&y, &p).unwrap();
        let b = rse(&f(&y), &f(&p)).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
    }

    #[test]
    fn corr_is_invariant_under_per_variable_positive_rescaling(seed in any::<u64>(), scales in prop::collection::vec((0.01f64..100.0, -10.0f64..10.0), 5)) {
        let (y, p) = instance(seed);
        let q: Vec<f64> = p.iter().enumerate().map(|(k, v)| scales[k % 5].0 * v + scales[k % 5].1).collect();
        let a = corr(&y, &p, 5).unwrap().mean;
        let b = corr(&y, &q, 5).unwrap().mean;
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn bounds_hold(seed in any::<u64>()) {
        let (y, p) = instance(seed);
        prop_assert!(rse(&y, &p).unwrap() >= 0.0);
        let c = corr(&y, &p, 5).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c.mean));
    }
}
