use crate::error::{Error, Result};

/// Sample autocorrelation `R(τ)` for `τ = 0..=max_lag`.
///
/// The series is centred on its sample mean; the lag-`τ` covariance uses
/// the unbiased `1 / (N - τ)` normalisation and is divided by the lag-0
/// variance (`1 / N`), so `R(0) = 1` exactly. Because numerator and
/// denominator use different normalisations, `|R(τ)|` can exceed 1 by a
/// small amount at large lags.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::Data(format!(
            "series of length {n} is too short for max lag {max_lag}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let var = centred.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return Err(Error::Degenerate("zero-variance series has no autocorrelation".into()));
    }
    Ok((0..=max_lag)
        .map(|lag| {
            if lag == 0 {
                return 1.0;
            }
            let cov = centred[..n - lag]
                .iter()
                .zip(&centred[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (n - lag) as f64;
            cov / var
        })
        .collect())
}

/// Lags `τ ≥ 1` where `R` is strictly greater than both neighbours.
pub fn local_maxima(r: &[f64]) -> Vec<usize> {
    (1..r.len().saturating_sub(1))
        .filter(|&k| r[k] > r[k - 1] && r[k] > r[k + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(autocorrelation(&[3.0; 50], 5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn lag_zero_is_one() {
        let r = autocorrelation(&[1.0, 3.0, 2.0, 5.0, 4.0], 2).unwrap();
        assert_eq!(r[0], 1.0);
    }

    #[test]
    fn too_short_is_rejected() {
        assert!(autocorrelation(&[1.0, 2.0, 3.0], 3).is_err());
    }

    #[test]
    fn hand_computed_lag_one() {
        // x = [1, 2, 3, 4], mean 2.5, centred [-1.5, -0.5, 0.5, 1.5]
        // var = 5/4; lag-1 cov = (0.75 - 0.25 + 0.75)/3 = 5/12; R = 1/3.
        let r = autocorrelation(&[1.0, 2.0, 3.0, 4.0], 1).unwrap();
        assert!((r[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn finds_interior_peaks() {
        assert_eq!(local_maxima(&[1.0, 0.2, 0.5, 0.1, 0.3, 0.2]), vec![2, 4]);
    }
}
