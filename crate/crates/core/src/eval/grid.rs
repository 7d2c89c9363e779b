use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID_TABLE_HEADER: &str = "index\tconfig\tstatus\tvalid_rse\tvalid_corr\tparams\tdetail";

/// Named hyper-parameter axes; the grid is their Cartesian product with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<(String, Vec<String>)>,
    /// Only the first `max_configs` points are run.
    pub max_configs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPoint {
    pub index: usize,
    pub assignments: Vec<(String, String)>,
}

impl GridPoint {
    /// `name=value` pairs joined by `;`, in axis order.
    pub fn key(&self) -> String {
        self.assignments
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub valid_rse: f64,
    pub valid_corr: f64,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub index: usize,
    pub key: String,
    /// Error message for runs that failed.
    pub result: std::result::Result<GridOutcome, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: GridRow,
    /// Every run, in grid order.
    pub rows: Vec<GridRow>,
    /// Full Cartesian size.
    pub total: usize,
    /// Points dropped by the configuration cap.
    pub truncated: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Config("grid has no axes".into()));
        }
        for (i, (name, values)) in self.axes.iter().enumerate() {
            if values.is_empty() {
                return Err(Error::Config(format!("grid axis `{name}` has no candidates")));
            }
            if self.axes[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::Config(format!("grid axis `{name}` appears twice")));
            }
            let bad = |s: &str| s.is_empty() || s.contains(['\t', '\n', ';', '=']);
            if bad(name) || values.iter().any(|v| bad(v)) {
                return Err(Error::Config(format!(
                    "grid axis `{name}`: names and values must be non-empty without tabs, newlines, `;` or `=`"
                )));
            }
        }
        if self.max_configs == Some(0) {
            return Err(Error::Config("grid configuration cap must be at least 1".into()));
        }
        Ok(())
    }

    /// Cartesian size before the cap.
    pub fn size(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).fold(1, usize::saturating_mul)
    }

    /// Points that will run, in grid order, after the cap.
    pub fn points(&self) -> Vec<GridPoint> {
        let count = self.max_configs.map_or(self.size(), |c| c.min(self.size()));
        (0..count)
            .map(|index| {
                let mut rest = index;
                let mut assignments = vec![(String::new(), String::new()); self.axes.len()];
                for (slot, (name, values)) in assignments.iter_mut().zip(&self.axes).rev() {
                    *slot = (name.clone(), values[rest % values.len()].clone());
                    rest /= values.len();
                }
                GridPoint { index, assignments }
            })
            .collect()
    }
}

impl GridRow {
    pub fn to_line(&self) -> String {
        match &self.result {
            Ok(o) => format!(
                "{}\t{}\tok\t{}\t{}\t{}\t",
                self.index, self.key, o.valid_rse, o.valid_corr, o.param_count
            ),
            Err(msg) => format!(
                "{}\t{}\tfailed\t\t\t\t{}",
                self.index,
                self.key,
                msg.replace(['\t', '\n'], " ")
            ),
        }
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let bad = || Error::Data(format!("malformed grid table line: {line:?}"));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(bad());
        }
        let index = f[0].parse().map_err(|_| bad())?;
        let result = match f[2] {
            "ok" => Ok(GridOutcome {
                valid_rse: f[3].parse().map_err(|_| bad())?,
                valid_corr: f[4].parse().map_err(|_| bad())?,
                param_count: f[5].parse().map_err(|_| bad())?,
            }),
            "failed" => Err(f[6].to_string()),
            _ => return Err(bad()),
        };
        Ok(GridRow {
            index,
            key: f[1].to_string(),
            result,
        })
    }
}

/// Header plus one line per row.
pub fn format_grid_table(rows: &[GridRow]) -> String {
    let mut s = format!("{GRID_TABLE_HEADER}\n");
    for r in rows {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

/// Reads a (possibly partial) table written by [`format_grid_table`].
/// A trailing line without its newline is treated as interrupted and skipped.
pub fn parse_grid_table(text: &str) -> Result<Vec<GridRow>> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    // The element after the final newline is empty for a complete table,
    // or a partially written line otherwise.
    lines.pop();
    match lines.first() {
        None => return Ok(Vec::new()),
        Some(h) if *h == GRID_TABLE_HEADER => {}
        Some(h) => return Err(Error::Data(format!("unexpected grid table header {h:?}"))),
    }
    lines[1..].iter().map(|l| GridRow::parse_line(l)).collect()
}

fn better(a: &GridRow, b: &GridRow) -> bool {
    let (Ok(x), Ok(y)) = (&a.result, &b.result) else {
        return false;
    };
    (x.valid_rse, x.param_count, a.index) < (y.valid_rse, y.param_count, b.index)
}

/// Runs every grid point not already present in `prior` and selects the
/// lowest validation RSE, breaking ties by fewer parameters and then by
/// grid order.
///
/// `on_row` sees each new row in grid order, so a caller can append it to a
/// persisted table and resume after an interruption. With `parallel` the
/// pending points are evaluated concurrently and reported once all finish.
pub fn grid_search<F>(
    spec: &GridSpec,
    prior: &[GridRow],
    run: F,
    parallel: bool,
    on_row: &mut dyn FnMut(&GridRow) -> Result<()>,
) -> Result<GridResult>
where
    F: Fn(&GridPoint) -> Result<GridOutcome> + Sync,
{
    spec.validate()?;
    let points = spec.points();
    for row in prior {
        match points.get(row.index) {
            Some(p) if p.key() == row.key => {}
            _ => {
                return Err(Error::Config(format!(
                    "existing grid table row {} `{}` does not belong to this grid",
                    row.index, row.key
                )))
            }
        }
    }
    let pending: Vec<&GridPoint> = points
        .iter()
        .filter(|p| !prior.iter().any(|r| r.index == p.index))
        .collect();

    let evaluate = |p: &GridPoint| GridRow {
        index: p.index,
        key: p.key(),
        result: match run(p) {
            Ok(o) if o.valid_rse.is_finite() => Ok(o),
            Ok(o) => Err(format!("validation RSE is {}", o.valid_rse)),
            Err(e) => Err(e.to_string()),
        },
    };
    let mut rows: Vec<GridRow> = prior.to_vec();
    if parallel {
        let fresh: Vec<GridRow> = pending.par_iter().map(|p| evaluate(p)).collect();
        for r in fresh {
            on_row(&r)?;
            rows.push(r);
        }
    } else {
        for p in pending {
            let r = evaluate(p);
            on_row(&r)?;
            rows.push(r);
        }
    }
    rows.sort_by_key(|r| r.index);

    let best = rows
        .iter()
        .filter(|r| r.result.is_ok())
        .fold(None::<&GridRow>, |acc, r| match acc {
            Some(b) if !better(r, b) => Some(b),
            _ => Some(r),
        })
        .cloned();
    let Some(best) = best else {
        let diagnostics = rows
            .iter()
            .map(|r| format!("[{}] {}", r.key, r.result.as_ref().err().map_or("", |s| s.as_str())))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::GridExhausted {
            count: rows.len(),
            diagnostics,
        });
    };
    Ok(GridResult {
        best,
        total: spec.size(),
        truncated: spec.size() - points.len(),
        rows,
    })
}
