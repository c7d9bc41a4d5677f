//! Walk-forward selection of the window size `n`, run separately for BBPT
//! and FFMDPT with `k` held fixed.
//!
//! Each split picks the best `n` on its in-sample range, then trades its
//! out-of-sample range with that `n`. All candidates in a grid start trading
//! on the same bar, `max(n_grid) − 1` bars into the in-sample range, so the
//! comparison is over identical periods. Out-of-sample runs seed their bands
//! with up to `max(n_grid)` observations from before the range so the first
//! out-of-sample date can trade.
//!
//! Returns are kept as log-return fractions. [`summarize_tables`] renders
//! them in percent.

use std::fmt::Write as _;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::BandParams;
use crate::engine::{run_strategy_from, EngineConfig, Execution, Strategy, Weighting};
use crate::error::{Error, Result};
use crate::series::{format_date, parse_date, LogRatioSeries};

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::Plan(format!(
                "range starts {} after it ends {}",
                format_date(start),
                format_date(end)
            )));
        }
        Ok(Self { start, end })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub label: String,
    pub in_sample: DateRange,
    pub out_sample: DateRange,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkForwardPlan {
    pub splits: Vec<Split>,
    pub k: f64,
    /// Sorted ascending, no duplicates.
    pub n_grid: Vec<usize>,
    pub weighting: Weighting,
    pub execution: Execution,
}

impl WalkForwardPlan {
    pub fn new(
        splits: Vec<Split>,
        k: f64,
        mut n_grid: Vec<usize>,
        weighting: Weighting,
        execution: Execution,
    ) -> Result<Self> {
        n_grid.sort_unstable();
        n_grid.dedup();
        if n_grid.is_empty() {
            return Err(Error::Plan("n_grid is empty".into()));
        }
        for &n in &n_grid {
            BandParams::new(n, k).map_err(|e| Error::Plan(e.to_string()))?;
        }
        if splits.is_empty() {
            return Err(Error::Plan("plan has no splits".into()));
        }
        for s in &splits {
            let degenerate = s.in_sample == s.out_sample;
            if !degenerate && s.in_sample.end >= s.out_sample.start {
                return Err(Error::Plan(format!(
                    "split {}: in-sample must end before out-of-sample starts",
                    s.label
                )));
            }
        }
        Ok(Self {
            splits,
            k,
            n_grid,
            weighting,
            execution,
        })
    }

    pub fn max_n(&self) -> usize {
        *self.n_grid.last().expect("grid is non-empty")
    }

    /// Reads the line-oriented plan format:
    ///
    /// ```text
    /// # comment
    /// k = 1
    /// n_grid = 10..50        # inclusive range, or a list: 10,20,30
    /// weighting = mean       # or sum
    /// execution = lagged     # or idealized
    /// split = 2004, 2003-01-01, 2003-12-31, 2004-01-01, 2004-12-31
    /// ```
    ///
    /// A split line gives a label, then the in-sample start and end, then the
    /// out-of-sample start and end.
    pub fn parse(text: &str) -> Result<Self> {
        let mut k = None;
        let mut n_grid = None;
        let mut weighting = Weighting::EqualPerTrade;
        let mut execution = Execution::Lagged;
        let mut splits = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Plan(format!("line {}: {msg}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key = value, got `{line}`")))?;
            let value = value.trim();
            match key.trim() {
                "k" => {
                    k = Some(
                        value
                            .parse::<f64>()
                            .map_err(|e| at(format!("bad k: {e}")))?,
                    );
                }
                "n_grid" => n_grid = Some(parse_grid(value).map_err(at)?),
                "weighting" => weighting = value.parse().map_err(|e: Error| at(e.to_string()))?,
                "execution" => execution = value.parse().map_err(|e: Error| at(e.to_string()))?,
                "split" => splits.push(parse_split(value).map_err(at)?),
                other => return Err(at(format!("unknown key `{other}`"))),
            }
        }
        let k = k.ok_or_else(|| Error::Plan("missing k".into()))?;
        let n_grid = n_grid.ok_or_else(|| Error::Plan("missing n_grid".into()))?;
        Self::new(splits, k, n_grid, weighting, execution)
    }

    /// Inverse of [`WalkForwardPlan::parse`]; the grid is written as a list.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let grid: Vec<String> = self.n_grid.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "n_grid = {}", grid.join(","));
        let _ = writeln!(s, "weighting = {}", self.weighting.as_str());
        let _ = writeln!(s, "execution = {}", self.execution.as_str());
        for sp in &self.splits {
            let _ = writeln!(
                s,
                "split = {}, {}, {}, {}, {}",
                sp.label,
                format_date(sp.in_sample.start),
                format_date(sp.in_sample.end),
                format_date(sp.out_sample.start),
                format_date(sp.out_sample.end)
            );
        }
        s
    }
}

fn parse_grid(value: &str) -> std::result::Result<Vec<usize>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad grid value `{}`: {e}", s.trim()))
    };
    if let Some((lo, hi)) = value.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(format!("empty grid range {lo}..{hi}"));
        }
        return Ok((lo..=hi).collect());
    }
    value.split(',').map(num).collect()
}

fn parse_split(value: &str) -> std::result::Result<Split, String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let [label, a, b, c, d] = parts.as_slice() else {
        return Err(format!(
            "split needs label, in_start, in_end, out_start, out_end; got `{value}`"
        ));
    };
    let date = |s: &str| parse_date(s).map_err(|e| e.to_string());
    let range = |s, e| DateRange::new(date(s)?, date(e)?).map_err(|e| e.to_string());
    Ok(Split {
        label: label.to_string(),
        in_sample: range(a, b)?,
        out_sample: range(c, d)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub n_bbpt: usize,
    pub rtn_bbpt: f64,
    pub n_ffmdpt: usize,
    pub rtn_ffmdpt: f64,
    /// `rtn_bbpt − rtn_ffmdpt`; positive when BBPT did better.
    pub diff: f64,
}

impl ComparisonRow {
    pub fn new(
        label: impl Into<String>,
        n_bbpt: usize,
        rtn_bbpt: f64,
        n_ffmdpt: usize,
        rtn_ffmdpt: f64,
    ) -> Self {
        Self {
            label: label.into(),
            n_bbpt,
            rtn_bbpt,
            n_ffmdpt,
            rtn_ffmdpt,
            diff: rtn_bbpt - rtn_ffmdpt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub best_n: usize,
    pub best_return: f64,
    /// `(n, return)` for every grid point, ascending in `n`.
    pub evaluations: Vec<(usize, f64)>,
}

/// Strategy return for every `n` in the grid, all trading from bar
/// `max(n_grid) − 1`. The best return wins, ties going to the smallest `n`.
pub fn grid_search(
    y: &[f64],
    strategy: Strategy,
    k: f64,
    n_grid: &[usize],
    weighting: Weighting,
    execution: Execution,
) -> Result<GridResult> {
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let max_n = *grid
        .last()
        .ok_or_else(|| Error::invalid("n_grid is empty"))?;
    if y.len() < max_n {
        return Err(Error::SeriesTooShort {
            len: y.len(),
            n: max_n,
        });
    }
    let evaluations = grid
        .par_iter()
        .map(|&n| {
            let config = EngineConfig::new(BandParams::new(n, k)?, strategy)
                .with_execution(execution)
                .with_weighting(weighting);
            let report = run_strategy_from(y, &config, max_n - 1)?;
            Ok((n, report.strategy_return.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let (best_n, best_return) = evaluations
        .iter()
        .copied()
        .fold(None, |best: Option<(usize, f64)>, (n, r)| match best {
            Some((_, b)) if b >= r => best,
            _ => Some((n, r)),
        })
        .expect("grid is non-empty");
    Ok(GridResult {
        best_n,
        best_return,
        evaluations,
    })
}

/// Index bounds of `range` within `series`, requiring the range to lie
/// inside the data span and to hold at least one observation.
fn locate(
    series: &LogRatioSeries,
    range: &DateRange,
    what: &str,
    label: &str,
) -> Result<(usize, usize)> {
    let dates = series.dates();
    let (first, last) = match (dates.first(), dates.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::EmptySeries),
    };
    if range.start < first || range.end > last {
        return Err(Error::MissingData(format!(
            "split {label}: {what} range {}..{} lies outside the data span {}..{}",
            format_date(range.start),
            format_date(range.end),
            format_date(first),
            format_date(last)
        )));
    }
    let lo = series.index_at_or_after(range.start);
    let hi = series.index_after(range.end);
    if lo >= hi {
        return Err(Error::MissingData(format!(
            "split {label}: no observations in {what} range {}..{}",
            format_date(range.start),
            format_date(range.end)
        )));
    }
    Ok((lo, hi - 1))
}

fn out_of_sample_return(
    y: &[f64],
    out: (usize, usize),
    warmup: usize,
    n: usize,
    strategy: Strategy,
    plan: &WalkForwardPlan,
) -> Result<f64> {
    let from = out.0.saturating_sub(warmup);
    let slice = &y[from..=out.1];
    let config = EngineConfig::new(BandParams::new(n, plan.k)?, strategy)
        .with_execution(plan.execution)
        .with_weighting(plan.weighting);
    Ok(run_strategy_from(slice, &config, out.0 - from)?
        .strategy_return
        .value)
}

/// Runs the plan over `series`, one row per split.
///
/// Each split's ranges must lie inside the data. The in-sample range must
/// end before the out-of-sample range starts, with no observation between
/// them, unless the two ranges are identical (a degenerate check of the
/// protocol itself).
pub fn walk_forward(series: &LogRatioSeries, plan: &WalkForwardPlan) -> Result<Vec<ComparisonRow>> {
    let y = series.values();
    let max_n = plan.max_n();
    plan.splits
        .iter()
        .map(|split| {
            let label = split.label.as_str();
            let ins = locate(series, &split.in_sample, "in-sample", label)?;
            let out = locate(series, &split.out_sample, "out-of-sample", label)?;
            if split.in_sample != split.out_sample && ins.1 + 1 != out.0 {
                return Err(Error::Plan(format!(
                    "split {label}: in-sample and out-of-sample ranges are not adjacent in the data"
                )));
            }
            let in_y = &y[ins.0..=ins.1];
            if in_y.len() < max_n {
                return Err(Error::MissingData(format!(
                    "split {label}: in-sample has {} observations, the grid needs {max_n}",
                    in_y.len()
                )));
            }
            let pick = |strategy| -> Result<(usize, f64)> {
                let best = grid_search(
                    in_y,
                    strategy,
                    plan.k,
                    &plan.n_grid,
                    plan.weighting,
                    plan.execution,
                )?;
                let rtn = out_of_sample_return(y, out, max_n, best.best_n, strategy, plan)?;
                Ok((best.best_n, rtn))
            };
            let (n_bbpt, rtn_bbpt) = pick(Strategy::Bbpt)?;
            let (n_ffmdpt, rtn_ffmdpt) = pick(Strategy::Ffmdpt)?;
            Ok(ComparisonRow::new(
                label, n_bbpt, rtn_bbpt, n_ffmdpt, rtn_ffmdpt,
            ))
        })
        .collect()
}

/// Aligned text table with returns in percent: three decimals for the
/// strategy returns and four for the difference.
pub fn summarize_tables(rows: &[ComparisonRow], k: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "k = {k}");
    let _ = writeln!(
        s,
        "{:<10} {:>7} {:>9} {:>9} {:>11} {:>9}",
        "Year", "n_BBPT", "RTN_BBPT", "n_FFMDPT", "RTN_FFMDPT", "DIFF"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>7} {:>9.3} {:>9} {:>11.3} {:>9.4}",
            r.label,
            r.n_bbpt,
            100.0 * r.rtn_bbpt,
            r.n_ffmdpt,
            100.0 * r.rtn_ffmdpt,
            100.0 * r.diff
        );
    }
    s
}

/// Rows as CSV with full-precision fractions.
pub fn rows_to_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv flush failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ComparisonRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
