//! Declarative run configuration with flat dotted keys.
//!
//! A config file is TOML whose keys, once nested tables are flattened with
//! `.`, must all be known (see [`RunConfig::KEYS`]). Axes of a grid search
//! are written under `grid.` with an array of candidates, e.g.
//! `grid."model.window" = [8, 16]`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lstnet_core::data::{Normalization, Part, ScaleShiftSpec, SplitSpec};
use lstnet_core::eval::{GridSpec, MetricScale};
use lstnet_core::model::LstNetConfig;
use lstnet_core::optim::TrainSchedule;
use lstnet_core::{Error, Result};
use toml::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lstnet,
    Ar,
    Ridge,
    Persistence,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstnet" => Ok(Method::Lstnet),
            "ar" => Ok(Method::Ar),
            "ridge" => Ok(Method::Ridge),
            "persistence" => Ok(Method::Persistence),
            _ => Err(Error::Config(format!(
                "unknown method `{s}` (expected lstnet, ar, ridge or persistence)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lstnet => "lstnet",
            Method::Ar => "ar",
            Method::Ridge => "ridge",
            Method::Persistence => "persistence",
        })
    }
}

/// Which split parts `evaluate` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartSelection {
    One(Part),
    All,
}

impl PartSelection {
    pub fn parts(self) -> Vec<Part> {
        match self {
            PartSelection::One(p) => vec![p],
            PartSelection::All => vec![Part::Train, Part::Valid, Part::Test],
        }
    }
}

impl FromStr for PartSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            Ok(PartSelection::All)
        } else {
            s.parse().map(PartSelection::One)
        }
    }
}

impl fmt::Display for PartSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartSelection::One(p) => p.fmt(f),
            PartSelection::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub delimiter: u8,
    pub normalize: Normalization,
    pub split: SplitSpec,
    pub method: Method,
    pub model: LstNetConfig,
    pub train: TrainSchedule,
    pub lambda: f64,
    pub max_features: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Defaults to `<out>/model.ckpt`.
    pub checkpoint: Option<PathBuf>,
    pub eval_part: PartSelection,
    pub eval_scale: MetricScale,
    pub eval_trace: bool,
    pub sim_order: usize,
    pub sim_period: usize,
    pub sim_mu0: f64,
    pub sim_length: usize,
    pub autocorr_variable: usize,
    pub autocorr_max_lag: usize,
    pub grid: Option<GridSpec>,
    pub grid_parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            delimiter: b',',
            normalize: Normalization::Max,
            split: SplitSpec::default(),
            method: Method::Lstnet,
            model: LstNetConfig::default(),
            train: TrainSchedule::default(),
            lambda: 1.0,
            max_features: lstnet_core::baselines::DEFAULT_MAX_RIDGE_FEATURES,
            seed: 0,
            out: PathBuf::from("out"),
            checkpoint: None,
            eval_part: PartSelection::One(Part::Test),
            eval_scale: MetricScale::Normalized,
            eval_trace: false,
            sim_order: 5,
            sim_period: 500,
            sim_mu0: 0.5,
            sim_length: 4000,
            autocorr_variable: 0,
            autocorr_max_lag: 400,
            grid: None,
            grid_parallel: false,
        }
    }
}

fn type_error(key: &str, want: &str, got: &Value) -> Error {
    Error::Config(format!("`{key}` expects {want}, got `{got}`"))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(type_error(key, "a non-negative integer", v)),
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(type_error(key, "a number", v)),
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| type_error(key, "a string", v))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| type_error(key, "true or false", v))
}

fn parsed<T: FromStr<Err = Error>>(key: &str, v: &Value) -> Result<T> {
    as_str(key, v)?.parse()
}

/// Interprets a command-line value: TOML syntax when it parses, else a bare string.
pub fn parse_cli_value(s: &str) -> Value {
    format!("v = {s}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(s.to_string()))
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

impl RunConfig {
    /// Every settable key, in echo order.
    pub const KEYS: &'static [&'static str] = &[
        "method",
        "seed",
        "out",
        "checkpoint",
        "dataset.path",
        "dataset.delimiter",
        "dataset.normalize",
        "split.train",
        "split.valid",
        "split.test",
        "model.window",
        "model.horizon",
        "model.variant",
        "model.conv_width",
        "model.conv_filters",
        "model.rnn_hidden",
        "model.skip_hidden",
        "model.skip",
        "model.ar_window",
        "model.dropout",
        "model.loss",
        "model.attn_score",
        "model.attn_hidden",
        "train.epochs",
        "train.batch_size",
        "train.patience",
        "train.lr",
        "train.clip",
        "train.optimizer",
        "train.ar_l2",
        "linear.lambda",
        "linear.max_features",
        "eval.part",
        "eval.scale",
        "eval.trace",
        "simulate.order",
        "simulate.period",
        "simulate.mu0",
        "simulate.length",
        "autocorr.variable",
        "autocorr.max_lag",
        "grid.max_configs",
        "grid.parallel",
    ];

    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("invalid TOML: {e}")))?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        let mut cfg = RunConfig::default();
        // Grid axes are collected in file order.
        let mut axes: Vec<(String, Vec<String>)> = Vec::new();
        for (key, value) in entries {
            match key.strip_prefix("grid.") {
                Some(rest) if rest != "max_configs" && rest != "parallel" => {
                    let Value::Array(items) = &value else {
                        return Err(type_error(&key, "an array of candidates", &value));
                    };
                    axes.push((rest.to_string(), items.iter().map(value_text).collect()));
                }
                _ => cfg.set(&key, &value)?,
            }
        }
        if !axes.is_empty() {
            let grid = cfg.grid.get_or_insert_with(|| GridSpec {
                axes: Vec::new(),
                max_configs: None,
            });
            grid.axes = axes;
        }
        if let Some(grid) = &cfg.grid {
            // Axis keys must themselves be settable.
            let mut probe = cfg.clone();
            for (name, values) in &grid.axes {
                if name.starts_with("grid.") || !Self::KEYS.contains(&name.as_str()) {
                    return Err(Error::Config(format!("unknown grid axis `{name}`")));
                }
                for v in values {
                    probe.set(name, &parse_cli_value(v))?;
                }
            }
        }
        Ok(cfg)
    }

    /// Sets one flat key. Unknown keys are a configuration error.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "method" => self.method = parsed(key, v)?,
            "seed" => self.seed = as_usize(key, v)? as u64,
            "out" => self.out = PathBuf::from(as_str(key, v)?),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(as_str(key, v)?)),
            "dataset.path" => self.dataset = Some(PathBuf::from(as_str(key, v)?)),
            "dataset.delimiter" => {
                let s = as_str(key, v)?;
                let s = if s == "\\t" { "\t" } else { s };
                match s.as_bytes() {
                    [b] => self.delimiter = *b,
                    _ => return Err(Error::Config(format!("`{key}` must be a single character"))),
                }
            }
            "dataset.normalize" => self.normalize = parsed(key, v)?,
            "split.train" => self.split.train = as_f64(key, v)?,
            "split.valid" => self.split.valid = as_f64(key, v)?,
            "split.test" => self.split.test = as_f64(key, v)?,
            "model.window" => m.window = as_usize(key, v)?,
            "model.horizon" => m.horizon = as_usize(key, v)?,
            "model.variant" => m.variant = parsed(key, v)?,
            "model.conv_width" => m.conv_width = as_usize(key, v)?,
            "model.conv_filters" => m.conv_filters = as_usize(key, v)?,
            "model.rnn_hidden" => m.rnn_hidden = as_usize(key, v)?,
            "model.skip_hidden" => m.skip_hidden = as_usize(key, v)?,
            "model.skip" => m.skip = as_usize(key, v)?,
            "model.ar_window" => m.ar_window = as_usize(key, v)?,
            "model.dropout" => m.dropout = as_f64(key, v)?,
            "model.loss" => m.loss = parsed(key, v)?,
            "model.attn_score" => m.attn_score = parsed(key, v)?,
            "model.attn_hidden" => m.attn_hidden = as_usize(key, v)?,
            "train.epochs" => t.epochs = as_usize(key, v)?,
            "train.batch_size" => t.batch_size = as_usize(key, v)?,
            "train.patience" => t.patience = as_usize(key, v)?,
            "train.lr" => t.lr = as_f64(key, v)?,
            // 0 disables clipping.
            "train.clip" => {
                let c = as_f64(key, v)?;
                t.clip = (c != 0.0).then_some(c);
            }
            "train.optimizer" => t.optimizer = parsed(key, v)?,
            "train.ar_l2" => t.ar_l2 = as_f64(key, v)?,
            "linear.lambda" => self.lambda = as_f64(key, v)?,
            "linear.max_features" => self.max_features = as_usize(key, v)?,
            "eval.part" => self.eval_part = parsed(key, v)?,
            "eval.scale" => self.eval_scale = parsed(key, v)?,
            "eval.trace" => self.eval_trace = as_bool(key, v)?,
            "simulate.order" => self.sim_order = as_usize(key, v)?,
            "simulate.period" => self.sim_period = as_usize(key, v)?,
            "simulate.mu0" => self.sim_mu0 = as_f64(key, v)?,
            "simulate.length" => self.sim_length = as_usize(key, v)?,
            "autocorr.variable" => self.autocorr_variable = as_usize(key, v)?,
            "autocorr.max_lag" => self.autocorr_max_lag = as_usize(key, v)?,
            "grid.max_configs" => {
                let cap = as_usize(key, v)?;
                self.grid
                    .get_or_insert_with(|| GridSpec {
                        axes: Vec::new(),
                        max_configs: None,
                    })
                    .max_configs = Some(cap);
            }
            "grid.parallel" => self.grid_parallel = as_bool(key, v)?,
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Current value of every key, in [`RunConfig::KEYS`] order; unset
    /// optional keys are omitted.
    pub fn entries(&self) -> Vec<(&'static str, Value)> {
        let s = |x: &dyn fmt::Display| Value::String(x.to_string());
        let i = |x: usize| Value::Integer(x as i64);
        let f = Value::Float;
        let m = &self.model;
        let t = &self.train;
        let mut out = Vec::new();
        for &key in Self::KEYS {
            let v = match key {
                "method" => s(&self.method),
                "seed" => Value::Integer(self.seed as i64),
                "out" => s(&self.out.display()),
                "checkpoint" => match &self.checkpoint {
                    Some(p) => s(&p.display()),
                    None => continue,
                },
                "dataset.path" => match &self.dataset {
                    Some(p) => s(&p.display()),
                    None => continue,
                },
                "dataset.delimiter" => match self.delimiter {
                    b'\t' => s(&"\\t"),
                    b => s(&(b as char)),
                },
                "dataset.normalize" => s(&self.normalize),
                "split.train" => f(self.split.train),
                "split.valid" => f(self.split.valid),
                "split.test" => f(self.split.test),
                "model.window" => i(m.window),
                "model.horizon" => i(m.horizon),
                "model.variant" => s(&m.variant),
                "model.conv_width" => i(m.conv_width),
                "model.conv_filters" => i(m.conv_filters),
                "model.rnn_hidden" => i(m.rnn_hidden),
                "model.skip_hidden" => i(m.skip_hidden),
                "model.skip" => i(m.skip),
                "model.ar_window" => i(m.ar_window),
                "model.dropout" => f(m.dropout),
                "model.loss" => s(&m.loss),
                "model.attn_score" => s(&m.attn_score),
                "model.attn_hidden" => i(m.attn_hidden),
                "train.epochs" => i(t.epochs),
                "train.batch_size" => i(t.batch_size),
                "train.patience" => i(t.patience),
                "train.lr" => f(t.lr),
                "train.clip" => f(t.clip.unwrap_or(0.0)),
                "train.optimizer" => s(&t.optimizer),
                "train.ar_l2" => f(t.ar_l2),
                "linear.lambda" => f(self.lambda),
                "linear.max_features" => i(self.max_features),
                "eval.part" => s(&self.eval_part),
                "eval.scale" => s(&self.eval_scale),
                "eval.trace" => Value::Boolean(self.eval_trace),
                "simulate.order" => i(self.sim_order),
                "simulate.period" => i(self.sim_period),
                "simulate.mu0" => f(self.sim_mu0),
                "simulate.length" => i(self.sim_length),
                "autocorr.variable" => i(self.autocorr_variable),
                "autocorr.max_lag" => i(self.autocorr_max_lag),
                "grid.max_configs" => match self.grid.as_ref().and_then(|g| g.max_configs) {
                    Some(c) => i(c),
                    None => continue,
                },
                "grid.parallel" => Value::Boolean(self.grid_parallel),
                _ => unreachable!("every key is listed"),
            };
            out.push((key, v));
        }
        out
    }

    /// The effective configuration as a config file that reproduces this run.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        if let Some(grid) = &self.grid {
            for (name, values) in &grid.axes {
                let arr: Vec<Value> = values.iter().map(|v| parse_cli_value(v)).collect();
                s.push_str(&format!("grid.\"{name}\" = {}\n", Value::Array(arr)));
            }
        }
        s
    }

    /// Semantic checks that need no data.
    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.train.validate()?;
        if self.method == Method::Lstnet {
            self.model.validate()?;
        } else if self.model.window == 0 || self.model.horizon == 0 {
            return Err(Error::Config("window and horizon must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "linear.lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        Ok(())
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset given (set dataset.path or pass --dataset)".into()))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("model.ckpt"))
    }

    pub fn scale_shift_spec(&self) -> ScaleShiftSpec {
        ScaleShiftSpec {
            order: self.sim_order,
            period: self.sim_period,
            mu0: self.sim_mu0,
            length: self.sim_length,
            seed: self.seed,
            weights: None,
        }
    }
}

/// Text of a grid candidate: strings unquoted, other values in TOML syntax.
fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
