//! Forecast quality metrics, the rolling-forecast harness, grid search and
//! report formatting.

mod grid;
mod metrics;
mod report;
mod rolling;

pub use grid::{
    format_grid_table, grid_search, parse_grid_table, GridOutcome, GridPoint, GridResult, GridRow, GridSpec,
    GRID_TABLE_HEADER,
};
pub use metrics::{corr, mse, rse, CorrReport};
pub use report::{format_table, format_trace, to_json_line};
pub use rolling::{rolling_evaluate, rolling_evaluate_audited, EvalReport, Forecaster, MetricScale, TracePoint};
