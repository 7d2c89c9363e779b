use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How series are scaled before windowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide each variable by its largest absolute value on the training split.
    Max,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Normalization::Max),
            "none" => Ok(Normalization::None),
            _ => Err(Error::Config(format!(
                "unknown normalization `{s}` (expected max or none)"
            ))),
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Normalization::Max => "max",
            Normalization::None => "none",
        })
    }
}

/// A `T × n` multivariate series, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    name: String,
    interval: String,
    len: usize,
    width: usize,
    values: Vec<f64>,
    scales: Vec<f64>,
}

impl TimeSeriesDataset {
    pub fn new(name: impl Into<String>, len: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if len == 0 || width == 0 {
            return Err(Error::Data(format!("dataset must be non-empty, got {len}x{width}")));
        }
        if values.len() != len * width {
            return Err(Error::Data(format!(
                "{len}x{width} dataset needs {} values, got {}",
                len * width,
                values.len()
            )));
        }
        Ok(TimeSeriesDataset {
            name: name.into(),
            interval: String::new(),
            len,
            width,
            values,
            scales: vec![1.0; width],
        })
    }

    /// Single-variable dataset.
    pub fn univariate(name: impl Into<String>, series: Vec<f64>) -> Result<Self> {
        let len = series.len();
        Self::new(name, len, 1, series)
    }

    pub fn from_columns(name: impl Into<String>, columns: &[Vec<f64>]) -> Result<Self> {
        let width = columns.len();
        let len = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != len) {
            return Err(Error::Data("columns differ in length".into()));
        }
        let mut values = Vec::with_capacity(len * width);
        for t in 0..len {
            values.extend(columns.iter().map(|c| c[t]));
        }
        Self::new(name, len, width, values)
    }

    pub fn with_interval(mut self, interval: impl Into<String>) -> Self {
        self.interval = interval.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn interval(&self) -> &str {
        &self.interval
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of variables `n`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-variable divisors applied by [`TimeSeriesDataset::normalize`];
    /// all ones for raw data.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.width..(t + 1) * self.width]
    }

    pub fn get(&self, t: usize, var: usize) -> f64 {
        self.values[t * self.width + var]
    }

    /// Rows `anchor + 1 - window ..= anchor` as one contiguous slice.
    pub fn window(&self, anchor: usize, window: usize) -> &[f64] {
        let start = anchor + 1 - window;
        &self.values[start * self.width..(anchor + 1) * self.width]
    }

    pub fn column(&self, var: usize) -> Vec<f64> {
        (0..self.len).map(|t| self.get(t, var)).collect()
    }

    /// First `len` rows and first `width` variables.
    pub fn truncate(&self, len: usize, width: usize) -> Result<Self> {
        let len = len.min(self.len);
        let width = width.min(self.width);
        let mut values = Vec::with_capacity(len * width);
        for t in 0..len {
            values.extend_from_slice(&self.row(t)[..width]);
        }
        let mut d = Self::new(self.name.clone(), len, width, values)?;
        d.interval = self.interval.clone();
        d.scales = self.scales[..width].to_vec();
        Ok(d)
    }

    /// Scales each variable by its largest absolute value over rows
    /// `0..fit_rows` (the training split). A variable whose maximum there is
    /// zero keeps factor 1.
    pub fn normalize(&self, mode: Normalization, fit_rows: usize) -> Result<Self> {
        let raw = self.denormalize();
        let mut out = raw.clone();
        if mode == Normalization::None {
            return Ok(out);
        }
        let fit_rows = fit_rows.min(self.len);
        if fit_rows == 0 {
            return Err(Error::Data("normalization needs at least one training row".into()));
        }
        for var in 0..self.width {
            let max = (0..fit_rows).map(|t| raw.get(t, var).abs()).fold(0.0, f64::max);
            out.scales[var] = if max > 0.0 { max } else { 1.0 };
        }
        for t in 0..self.len {
            for var in 0..self.width {
                out.values[t * self.width + var] /= out.scales[var];
            }
        }
        Ok(out)
    }

    /// Undoes normalization, returning raw-scale values and unit factors.
    pub fn denormalize(&self) -> Self {
        let mut out = self.clone();
        for t in 0..self.len {
            for var in 0..self.width {
                out.values[t * self.width + var] *= self.scales[var];
            }
        }
        out.scales = vec![1.0; self.width];
        out
    }

    /// Reinstates stored normalization factors (e.g. from a checkpoint) on
    /// raw data.
    pub fn apply_scales(&self, scales: &[f64]) -> Result<Self> {
        if scales.len() != self.width {
            return Err(Error::Data(format!(
                "{} normalization factors for {} variables",
                scales.len(),
                self.width
            )));
        }
        if scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Data("normalization factors must be positive".into()));
        }
        let mut out = self.denormalize();
        for t in 0..self.len {
            for var in 0..self.width {
                out.values[t * self.width + var] /= scales[var];
            }
        }
        out.scales = scales.to_vec();
        Ok(out)
    }
}

/// Reads delimited text: one time step per row, one variable per field, no
/// header.
pub fn load_dataset(path: &Path, delimiter: u8) -> Result<TimeSeriesDataset> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut width = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(format!("row {}: {e}", r + 1)))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(format!(
                    "row {} has {} fields, expected {w}",
                    r + 1,
                    record.len()
                )));
            }
            _ => {}
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(format!(
                    "row {}, column {}: cannot parse `{field}` as a number",
                    r + 1,
                    c + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(parse_err(format!("row {}, column {}: non-finite value", r + 1, c + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| parse_err("file contains no data rows".into()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    TimeSeriesDataset::new(name, rows, width, values)
}
