//! Command-line front end: configuration handling and the subcommands.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lstnet_core::{Error, ErrorCategory, Result};
use toml::Value;

use commands::Status;
use config::{parse_cli_value, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "lstnet", version, about = "Train, evaluate and inspect LSTNet forecasters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the configured method and checkpoint it.
    Train,
    /// Rolling evaluation of a checkpoint.
    Evaluate,
    /// Forecast past the end of the dataset.
    Forecast,
    /// Generate a scale-shift AR series.
    Simulate,
    /// Sample autocorrelation of one variable.
    Autocorr,
    /// Hyper-parameter grid search on the validation part.
    Grid,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    #[arg(long, global = true)]
    pub variant: Option<String>,
    #[arg(long, global = true)]
    pub method: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// max or none.
    #[arg(long, global = true)]
    pub normalize: Option<String>,
    /// Recompute even when outputs already exist.
    #[arg(long, global = true)]
    pub overwrite: bool,
    /// Any configuration key, e.g. `--set model.window=24`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub sets: Vec<String>,
}

impl CommonArgs {
    /// The file configuration (or defaults) with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            cfg.set(k.trim(), &parse_cli_value(v.trim()))?;
        }
        let text = |s: &str| Value::String(s.to_string());
        let path = |p: &PathBuf| Value::String(p.display().to_string());
        let flags: [(&str, Option<Value>); 8] = [
            ("dataset.path", self.dataset.as_ref().map(path)),
            ("model.horizon", self.horizon.map(|h| Value::Integer(h as i64))),
            ("model.variant", self.variant.as_deref().map(text)),
            ("method", self.method.as_deref().map(text)),
            ("seed", self.seed.map(|s| Value::Integer(s as i64))),
            ("out", self.out.as_ref().map(path)),
            ("checkpoint", self.checkpoint.as_ref().map(path)),
            ("dataset.normalize", self.normalize.as_deref().map(text)),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        Ok(cfg)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.category() {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numeric => 4,
    }
}

/// Runs one parsed invocation, returning a one-line summary.
pub fn execute(cli: &Cli) -> Result<String> {
    let cfg = cli.common.resolve()?;
    let ow = cli.common.overwrite;
    let status = match cli.command {
        Command::Train => commands::train_cmd(&cfg, ow)?,
        Command::Evaluate => commands::evaluate_cmd(&cfg, ow)?,
        Command::Forecast => commands::forecast_cmd(&cfg, ow)?,
        Command::Simulate => commands::simulate_cmd(&cfg, ow)?,
        Command::Autocorr => {
            let (status, peaks) = commands::autocorr_cmd(&cfg, ow)?;
            if status == Status::Done {
                return Ok(format!("autocorrelation local maxima at lags {peaks:?}"));
            }
            status
        }
        Command::Grid => commands::grid_cmd(&cfg, ow)?,
    };
    Ok(match status {
        Status::Done => format!("outputs written to {}", cfg.out.display()),
        Status::Skipped(p) => format!("{} exists; skipped (pass --overwrite to recompute)", p.display()),
    })
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
