use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::model::WindowBatch;
use crate::tensor::Tensor;

/// Chronological train/valid/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.6,
            valid: 0.2,
            test: 0.2,
        }
    }
}

/// Row boundaries: train is `0..train_end`, valid `train_end..valid_end`,
/// test `valid_end..len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitBounds {
    pub train_end: usize,
    pub valid_end: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Train => "train",
            Part::Valid => "valid",
            Part::Test => "test",
        })
    }
}

impl std::str::FromStr for Part {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Part::Train),
            "valid" => Ok(Part::Valid),
            "test" => Ok(Part::Test),
            _ => Err(Error::Config(format!("unknown split part `{s}`"))),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config(format!("split fractions must lie in [0, 1]: {self:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1: {self:?}")));
        }
        if self.train == 0.0 {
            return Err(Error::Config("training fraction must be positive".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, len: usize) -> Result<SplitBounds> {
        self.validate()?;
        let cut = |f: f64| ((f * len as f64) + 1e-9).floor() as usize;
        let train_end = cut(self.train).min(len);
        let valid_end = cut(self.train + self.valid).clamp(train_end, len);
        Ok(SplitBounds {
            train_end,
            valid_end,
            len,
        })
    }
}

impl SplitBounds {
    /// Target rows belonging to `part`.
    pub fn range(&self, part: Part) -> std::ops::Range<usize> {
        match part {
            Part::Train => 0..self.train_end,
            Part::Valid => self.train_end..self.valid_end,
            Part::Test => self.valid_end..self.len,
        }
    }

    pub fn part_of(&self, row: usize) -> Option<Part> {
        [Part::Train, Part::Valid, Part::Test]
            .into_iter()
            .find(|p| self.range(*p).contains(&row))
    }
}

/// One supervised pair: the window ending at `anchor` and the row `target =
/// anchor + horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSample {
    pub anchor: usize,
    pub target: usize,
}

impl WindowSample {
    /// First row read by the input window.
    pub fn first_row(&self, window: usize) -> usize {
        self.anchor + 1 - window
    }
}

/// Every sample whose target lies in rows `targets`.
///
/// With `lookback` false the input windows must also lie inside the range
/// (the count is then `len - (window - 1) - horizon`); with `lookback` true
/// windows may start before the range, which is how validation and test
/// parts borrow history in rolling forecasting. Returns an empty list when
/// no target is eligible.
pub fn windowize_range(
    targets: std::ops::Range<usize>,
    window: usize,
    horizon: usize,
    lookback: bool,
) -> Result<Vec<WindowSample>> {
    if window == 0 || horizon == 0 {
        return Err(Error::Config(format!(
            "window and horizon must be at least 1 (got {window}, {horizon})"
        )));
    }
    let earliest = window - 1 + horizon;
    let lo = if lookback {
        targets.start.max(earliest)
    } else {
        targets.start + earliest
    };
    Ok((lo..targets.end.max(lo))
        .map(|target| WindowSample {
            anchor: target - horizon,
            target,
        })
        .collect())
}

/// Samples for one split part. Training windows stay inside the training
/// rows; validation and test windows may reach back into earlier rows.
pub fn windowize(
    dataset: &TimeSeriesDataset,
    window: usize,
    horizon: usize,
    bounds: &SplitBounds,
    part: Part,
) -> Result<Vec<WindowSample>> {
    if bounds.len != dataset.len() {
        return Err(Error::Data(format!(
            "split resolved for {} rows, dataset has {}",
            bounds.len,
            dataset.len()
        )));
    }
    windowize_range(bounds.range(part), window, horizon, part != Part::Train)
}

/// Stacks the input windows and target rows of `samples`.
pub fn assemble_batch(
    dataset: &TimeSeriesDataset,
    samples: &[WindowSample],
    window: usize,
) -> Result<(WindowBatch, Tensor)> {
    let n = dataset.width();
    let batch = WindowBatch::from_windows(window, n, samples.iter().map(|s| dataset.window(s.anchor, window)))?;
    let mut targets = Vec::with_capacity(samples.len() * n);
    for s in samples {
        targets.extend_from_slice(dataset.row(s.target));
    }
    Ok((batch, Tensor::new(vec![samples.len(), n], targets)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_single_part() {
        let s = windowize_range(0..10, 3, 2, false).unwrap();
        assert_eq!(s.len(), 6);
        // 1-based anchors 3..8 are 0-based 2..7.
        assert_eq!(s.first().unwrap().anchor, 2);
        assert_eq!(s.last().unwrap().anchor, 7);
        assert_eq!(s.last().unwrap().target, 9);
    }

    #[test]
    fn full_length_window_gives_explicit_empty() {
        for h in 1..4 {
            assert!(windowize_range(0..10, 10, h, false).unwrap().is_empty());
        }
    }

    #[test]
    fn default_split_is_60_20_20() {
        let b = SplitSpec::default().resolve(100).unwrap();
        assert_eq!((b.train_end, b.valid_end, b.len), (60, 80, 100));
        let b = SplitSpec::default().resolve(7588).unwrap();
        assert_eq!((b.train_end, b.valid_end), (4552, 6070));
    }

    #[test]
    fn bad_fractions_rejected() {
        let s = SplitSpec {
            train: 0.5,
            valid: 0.2,
            test: 0.2,
        };
        assert!(s.resolve(10).is_err());
    }

    #[test]
    fn validation_windows_reach_back() {
        let ds = TimeSeriesDataset::univariate("s", (0..100).map(f64::from).collect()).unwrap();
        let b = SplitSpec::default().resolve(100).unwrap();
        let v = windowize(&ds, 24, 3, &b, Part::Valid).unwrap();
        assert_eq!(v.len(), 20);
        assert_eq!(v[0].target, 60);
        assert!(v[0].first_row(24) < 60);
    }

    fn brute_count(a: usize, b: usize, q: usize, h: usize) -> usize {
        // Enumerate every anchor whose window and target lie in [a, b].
        let mut count = 0;
        for anchor in 0..=b {
            if anchor + 1 >= q && anchor + 1 - q >= a && anchor + h <= b {
                count += 1;
            }
        }
        count
    }

    proptest! {
        #[test]
        fn count_matches_enumeration(a in 0usize..20, len in 1usize..80, q in 1usize..30, h in 1usize..10) {
            let b = a + len - 1;
            let got = windowize_range(a..b + 1, q, h, false).unwrap().len();
            prop_assert_eq!(got, brute_count(a, b, q, h));
            let formula = (b - a + 1) as i64 - (q as i64 - 1) - h as i64;
            prop_assert_eq!(got as i64, formula.max(0));
        }

        #[test]
        fn split_partitions_rows_without_leakage(len in 10usize..500, q in 1usize..8, h in 1usize..5) {
            let bounds = SplitSpec::default().resolve(len).unwrap();
            for row in 0..len {
                let hits = [Part::Train, Part::Valid, Part::Test]
                    .iter()
                    .filter(|p| bounds.range(**p).contains(&row))
                    .count();
                prop_assert_eq!(hits, 1);
            }
            let ds = TimeSeriesDataset::univariate("s", vec![0.0; len]).unwrap();
            for s in windowize(&ds, q, h, &bounds, Part::Train).unwrap() {
                prop_assert!(s.target < bounds.train_end);
                prop_assert_eq!(bounds.part_of(s.target), Some(Part::Train));
            }
            for part in [Part::Valid, Part::Test] {
                for s in windowize(&ds, q, h, &bounds, part).unwrap() {
                    prop_assert_eq!(bounds.part_of(s.target), Some(part));
                }
            }
        }
    }
}
