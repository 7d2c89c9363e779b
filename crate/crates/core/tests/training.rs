//! Training-loop properties: batch invariance, descent, determinism.

mod common;

use common::toy_config;
use lstnet_core::data::{windowize, Part, SplitSpec, TimeSeriesDataset};
use lstnet_core::model::{LstNetConfig, LstNetModel, Variant};
use lstnet_core::optim::{batch_gradients, train, TrainSchedule};

fn toy_series(len: usize, width: usize) -> TimeSeriesDataset {
    let cols: Vec<Vec<f64>> = (0..width)
        .map(|i| {
            (0..len)
                .map(|t| {
                    let t = t as f64;
                    (t * 0.3 + i as f64).sin() + 0.5 * (t * 0.05 * (i + 1) as f64).cos()
                })
                .collect()
        })
        .collect();
    TimeSeriesDataset::from_columns("toy", &cols).unwrap()
}

#[test]
fn minibatch_gradients_sum_to_full_batch() {
    let ds = toy_series(120, 2);
    let bounds = SplitSpec::default().resolve(ds.len()).unwrap();
    for variant in [Variant::Skip, Variant::Attn, Variant::GruOnly] {
        let cfg = LstNetConfig {
            dropout: 0.3, // inactive without a random source
            ..toy_config(variant)
        };
        let model = LstNetModel::new(cfg.clone(), 2, 4).unwrap();
        let samples = windowize(&ds, cfg.window, cfg.horizon, &bounds, Part::Train).unwrap();
        let (full_loss, full) = batch_gradients(&model, &ds, &samples, 0.0, None).unwrap();
        let mut acc: Vec<Vec<f64>> = full.iter().map(|t| vec![0.0; t.len()]).collect();
        let mut loss = 0.0;
        for chunk in samples.chunks(7) {
            let (l, g) = batch_gradients(&model, &ds, chunk, 0.0, None).unwrap();
            loss += l;
            for (a, t) in acc.iter_mut().zip(&g) {
                a.iter_mut().zip(t.data()).for_each(|(x, y)| *x += y);
            }
        }
        assert!((loss - full_loss).abs() < 1e-10 * full_loss.max(1.0));
        for (a, t) in acc.iter().zip(&full) {
            for (x, y) in a.iter().zip(t.data()) {
                assert!((x - y).abs() < 1e-10, "{variant}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn gru_only_descends_over_first_epochs() {
    let ds = toy_series(200, 1);
    let bounds = SplitSpec::default().resolve(ds.len()).unwrap();
    let cfg = LstNetConfig {
        window: 12,
        rnn_hidden: 8,
        dropout: 0.0,
        variant: Variant::GruOnly,
        ..Default::default()
    };
    let schedule = TrainSchedule {
        epochs: 5,
        batch_size: 16,
        patience: 5,
        lr: 3e-3,
        ..Default::default()
    };
    let run = train(LstNetModel::new(cfg, 1, 2).unwrap(), &ds, &bounds, &schedule, 2).unwrap();
    let losses: Vec<f64> = run.history.iter().map(|r| r.train_loss).collect();
    assert_eq!(losses.len(), 5);
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-3), "{losses:?}");
    }
    assert!(losses[4] < losses[0]);
}

#[test]
fn identical_seeds_give_identical_runs() {
    let ds = toy_series(150, 2);
    let bounds = SplitSpec::default().resolve(ds.len()).unwrap();
    let cfg = LstNetConfig {
        dropout: 0.2,
        ..toy_config(Variant::Skip)
    };
    let schedule = TrainSchedule {
        epochs: 3,
        batch_size: 8,
        ..Default::default()
    };
    let go = |seed| {
        train(
            LstNetModel::new(cfg.clone(), 2, seed).unwrap(),
            &ds,
            &bounds,
            &schedule,
            seed,
        )
        .unwrap()
    };
    let (a, b, c) = (go(11), go(11), go(12));
    let bits = |r: &lstnet_core::optim::TrainRun| -> Vec<u64> {
        r.history
            .iter()
            .flat_map(|e| [e.train_loss.to_bits(), e.valid_rse.to_bits(), e.valid_corr.to_bits()])
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.model, b.model);
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn frozen_components_are_absent() {
    let ds = toy_series(120, 2);
    let bounds = SplitSpec::default().resolve(ds.len()).unwrap();
    let schedule = TrainSchedule {
        epochs: 2,
        batch_size: 16,
        ..Default::default()
    };
    let run = train(
        LstNetModel::new(toy_config(Variant::NoAr), 2, 1).unwrap(),
        &ds,
        &bounds,
        &schedule,
        1,
    )
    .unwrap();
    assert!(run.model.params().names().all(|n| !n.starts_with("ar.")));
}
