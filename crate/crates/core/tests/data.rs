//! Loading, autocorrelation and windowing against analytic expectations.

use std::path::PathBuf;

use lstnet_core::data::{autocorrelation, load_dataset, local_maxima, windowize_range};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn sinusoid_peaks_at_period_multiples() {
    let x: Vec<f64> = (0..10_000)
        .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin())
        .collect();
    let r = autocorrelation(&x, 100).unwrap();
    assert_eq!(local_maxima(&r), vec![24, 48, 72, 96]);
    // cos(2πτ/24) for a pure sinusoid.
    for (tau, v) in r.iter().enumerate() {
        let want = (2.0 * std::f64::consts::PI * tau as f64 / 24.0).cos();
        assert!((v - want).abs() < 1e-2, "τ={tau}: {v} vs {want}");
    }
}

#[test]
fn white_noise_is_uncorrelated() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let r = autocorrelation(&x, 200).unwrap();
    assert_eq!(r[0], 1.0);
    assert!(
        r[1..].iter().all(|v| v.abs() < 0.05),
        "max {}",
        r[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    );
}

#[test]
fn windowize_count_matches_formula() {
    for len in 1..40usize {
        for q in 1..8 {
            for h in 1..6 {
                let got = windowize_range(0..len, q, h, false).unwrap().len();
                let want = (len as i64 - (q as i64 - 1) - h as i64).max(0) as usize;
                assert_eq!(got, want, "len {len} q {q} h {h}");
            }
        }
    }
}

fn data_file(name: &str) -> Option<PathBuf> {
    let dir = std::env::var_os("LSTNET_DATA_DIR")?;
    let p = PathBuf::from(dir).join(name);
    p.exists().then_some(p)
}

#[test]
#[ignore = "needs the benchmark files under LSTNET_DATA_DIR"]
fn benchmark_files_have_published_shapes() {
    let expected = [
        ("exchange_rate.txt", 7588, 8),
        ("electricity.txt", 26304, 321),
        ("traffic.txt", 17544, 862),
        ("solar_AL.txt", 52560, 137),
    ];
    let mut checked = 0;
    for (file, t, n) in expected {
        if let Some(path) = data_file(file) {
            let ds = load_dataset(&path, b',').unwrap();
            assert_eq!((ds.len(), ds.width()), (t, n), "{file}");
            checked += 1;
        }
    }
    assert!(checked > 0, "no benchmark file found under LSTNET_DATA_DIR");
}
