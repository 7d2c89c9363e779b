use serde_json::json;

use crate::eval::EvalReport;

/// One JSON object per report with the keys `method`, `dataset`, `part`,
/// `horizon`, `scale`, `rse`, `corr`, `excluded_vars`, `runtime_seconds`.
pub fn to_json_line(r: &EvalReport) -> String {
    json!({
        "method": r.method,
        "dataset": r.dataset,
        "part": r.part,
        "horizon": r.horizon,
        "scale": r.scale.to_string(),
        "rse": r.rse,
        "corr": r.corr,
        "excluded_vars": r.excluded_vars,
        "runtime_seconds": r.runtime_seconds,
    })
    .to_string()
}

/// Fixed-width comparison table, one row per report.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut s = format!(
        "{:<18} {:<16} {:<6} {:>7} {:>10} {:>10} {:>8} {:>9}\n",
        "method", "dataset", "part", "horizon", "RSE", "CORR", "excluded", "seconds"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<18} {:<16} {:<6} {:>7} {:>10.4} {:>10.4} {:>8} {:>9.2}\n",
            r.method, r.dataset, r.part, r.horizon, r.rse, r.corr, r.excluded_vars, r.runtime_seconds
        ));
    }
    s
}

/// Tab-separated `t, variable, truth, prediction` with a header line.
pub fn format_trace(r: &EvalReport) -> String {
    let mut s = String::from("t\tvariable\ttruth\tprediction\n");
    for p in &r.trace {
        s.push_str(&format!("{}\t{}\t{}\t{}\n", p.t, p.variable, p.truth, p.prediction));
    }
    s
}
