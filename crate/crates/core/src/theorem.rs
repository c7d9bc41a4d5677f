//! Verification harness for the return–duration theorem and its lemmas.
//!
//! The theorem states that, under idealized execution, a BBPT trade has a
//! non-negative log return exactly when it lasts no more than `n` bars. The
//! harness checks this over every path of a small discrete alphabet and over
//! seeded Gaussian random walks, and checks each supporting lemma on its
//! constructed scenarios and on exhaustive sweeps.
//!
//! Only trades whose exit rule fired and whose precondition held (no trade
//! completed within the `n` bars before entry) are asserted. Everything else
//! is counted and reported so the gate cannot hide a violation.
//!
//! Paths on which some signal bar sits exactly on a band are set aside as
//! ties. They stand in for the infinitesimal price improvement that lets
//! the proofs ignore edge cases.

use std::fmt::Write as _;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bands::{bollinger_bands, rolling_mean, BandParams, BandSet};
use crate::engine::{run_with_bands, EngineConfig, Execution, ExitReason, Side, Strategy, Trade};
use crate::error::{Error, Result};

/// Largest path count [`enumerate_paths`] accepts.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Violations kept with full replay data in a sweep summary.
pub const REPLAY_CAP: usize = 25;

/// Discrete path family: every sequence of `length` increments drawn from
/// `alphabet`, accumulated from `start_value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSpec {
    length: usize,
    alphabet: Vec<f64>,
    start_value: f64,
    delta: f64,
}

impl PathSpec {
    pub fn new(length: usize, alphabet: Vec<f64>, start_value: f64, delta: f64) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::invalid("alphabet must not be empty"));
        }
        if alphabet.iter().any(|a| !a.is_finite()) || !start_value.is_finite() {
            return Err(Error::invalid("alphabet and start value must be finite"));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
        }
        let min_step = alphabet
            .iter()
            .map(|a| a.abs())
            .filter(|a| *a > 0.0)
            .fold(f64::INFINITY, f64::min);
        if min_step.is_finite() && delta >= min_step {
            return Err(Error::invalid(format!(
                "delta {delta} must be small relative to the smallest step {min_step}"
            )));
        }
        Ok(Self {
            length,
            alphabet,
            start_value,
            delta,
        })
    }

    /// The `{−d, 0, +d}` family with `delta = d / 1000`.
    pub fn ternary(length: usize, d: f64) -> Result<Self> {
        Self::new(length, vec![-d, 0.0, d], 0.0, d / 1000.0)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn alphabet(&self) -> &[f64] {
        &self.alphabet
    }

    pub fn start_value(&self) -> f64 {
        self.start_value
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn path_count(&self) -> u128 {
        (self.alphabet.len() as u128).saturating_pow(self.length as u32)
    }
}

/// Random-access view of an enumerated path family. Path `id` reads its
/// increments as base-`|alphabet|` digits, most significant first.
#[derive(Debug, Clone)]
pub struct PathEnumerator {
    spec: PathSpec,
    count: u64,
}

pub fn enumerate_paths(spec: &PathSpec) -> Result<PathEnumerator> {
    let count = spec.path_count();
    if count > ENUMERATION_LIMIT as u128 {
        return Err(Error::EnumerationGuard {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(PathEnumerator {
        spec: spec.clone(),
        count: count as u64,
    })
}

impl PathEnumerator {
    pub fn spec(&self) -> &PathSpec {
        &self.spec
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn path(&self, id: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.spec.length);
        self.fill(id, &mut out);
        out
    }

    fn fill(&self, id: u64, out: &mut Vec<f64>) {
        let base = self.spec.alphabet.len() as u64;
        let len = self.spec.length;
        out.clear();
        out.resize(len, 0.0);
        let mut rest = id;
        for slot in out.iter_mut().rev() {
            *slot = self.spec.alphabet[(rest % base) as usize];
            rest /= base;
        }
        let mut level = self.spec.start_value;
        for v in out.iter_mut() {
            level += *v;
            *v = level;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, Vec<f64>)> + '_ {
        (0..self.count).map(move |id| (id, self.path(id)))
    }
}

/// Cumulative sum of `length` independent N(0, step_sd²) steps.
///
/// # Panics
/// If `step_sd` is negative or not finite.
pub fn gen_random_walk(seed: u64, length: usize, step_sd: f64) -> Vec<f64> {
    walk_from_rng(&mut ChaCha8Rng::seed_from_u64(seed), length, step_sd)
}

/// The `stream`-th walk of a seeded family. Each walk has its own ChaCha
/// stream, so walks can be generated in any order.
pub fn gen_random_walk_stream(seed: u64, stream: u64, length: usize, step_sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    walk_from_rng(&mut rng, length, step_sd)
}

fn walk_from_rng(rng: &mut ChaCha8Rng, length: usize, step_sd: f64) -> Vec<f64> {
    let steps = Normal::new(0.0, step_sd).expect("step_sd must be finite and >= 0");
    let mut level = 0.0;
    (0..length)
        .map(|_| {
            level += steps.sample(rng);
            level
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// Non-negative return but duration above `n`.
    WinTooLong,
    /// Negative return within `n` bars.
    LossTooShort,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::WinTooLong => "win-too-long",
            ViolationKind::LossTooShort => "loss-too-short",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeRecord {
    pub side: Side,
    pub signal_index: usize,
    pub entry_index: usize,
    pub exit_index: usize,
    pub duration: usize,
    pub log_return: f64,
    pub precondition_held: bool,
    pub exit_rule_fired: bool,
    /// The signal bar sits exactly on a band.
    pub band_tie: bool,
}

impl TradeRecord {
    pub fn asserted(&self) -> bool {
        self.exit_rule_fired && self.precondition_held
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    /// Position in [`TheoremVerdict::records`].
    pub trade: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremVerdict {
    pub path_id: Option<u64>,
    pub n: usize,
    pub k: f64,
    pub execution: Execution,
    pub records: Vec<TradeRecord>,
    pub violations: Vec<Violation>,
}

impl TheoremVerdict {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_tie(&self) -> bool {
        self.records.iter().any(|r| r.band_tie)
    }

    pub fn checked(&self) -> usize {
        self.records.iter().filter(|r| r.asserted()).count()
    }

    /// Closed trades left out because the precondition failed.
    pub fn gated(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.exit_rule_fired && !r.precondition_held)
            .count()
    }

    pub fn end_of_data(&self) -> usize {
        self.records.iter().filter(|r| !r.exit_rule_fired).count()
    }
}

fn classify(record: &TradeRecord, n: usize) -> Option<ViolationKind> {
    let win = record.log_return >= 0.0;
    let short = record.duration <= n;
    match (win, short) {
        (true, false) => Some(ViolationKind::WinTooLong),
        (false, true) => Some(ViolationKind::LossTooShort),
        _ => None,
    }
}

fn verdict_from_trades(
    y: &[f64],
    bands: &BandSet,
    trades: &[Trade],
    execution: Execution,
) -> TheoremVerdict {
    let n = bands.params.n();
    let records: Vec<TradeRecord> = trades
        .iter()
        .map(|t| {
            let s = t.signal_index;
            TradeRecord {
                side: t.side,
                signal_index: s,
                entry_index: t.entry_index,
                exit_index: t.exit_index,
                duration: t.duration,
                log_return: t.log_return,
                precondition_held: t.precondition_held,
                exit_rule_fired: t.exit_reason != ExitReason::EndOfData,
                band_tie: bands.upper[s] == Some(y[s]) || bands.lower[s] == Some(y[s]),
            }
        })
        .collect();
    let violations = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.asserted())
        .filter_map(|(i, r)| classify(r, n).map(|kind| Violation { trade: i, kind }))
        .collect();
    TheoremVerdict {
        path_id: None,
        n,
        k: bands.params.k(),
        execution,
        records,
        violations,
    }
}

/// Runs BBPT with idealized execution and checks the biconditional on every
/// closed, precondition-gated trade.
pub fn verify_theorem1(y: &[f64], n: usize, k: f64) -> Result<TheoremVerdict> {
    verify_theorem1_with(y, BandParams::new(n, k)?, Execution::Idealized)
}

/// As [`verify_theorem1`] with a chosen execution mode. Lagged execution is
/// outside the theorem's assumptions; violations there are expected.
pub fn verify_theorem1_with(
    y: &[f64],
    params: BandParams,
    execution: Execution,
) -> Result<TheoremVerdict> {
    let bands = bollinger_bands(y, params)?;
    let config = EngineConfig::new(params, Strategy::Bbpt).with_execution(execution);
    let report = run_with_bands(y, &bands, &config, 0);
    Ok(verdict_from_trades(y, &bands, &report.trades, execution))
}

/// Counters for one `(n, k)` cell of a sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SweepCell {
    pub n: usize,
    pub k: f64,
    pub paths: u64,
    pub tie_paths: u64,
    pub trades: u64,
    pub end_of_data: u64,
    pub gated: u64,
    pub checked: u64,
    pub violations: u64,
    pub ffmdpt_trades: u64,
    /// FFMDPT trades lasting more than `n` bars.
    pub ffmdpt_over_n: u64,
}

impl SweepCell {
    fn merge(&mut self, other: &SweepCell) {
        self.paths += other.paths;
        self.tie_paths += other.tie_paths;
        self.trades += other.trades;
        self.end_of_data += other.end_of_data;
        self.gated += other.gated;
        self.checked += other.checked;
        self.violations += other.violations;
        self.ffmdpt_trades += other.ffmdpt_trades;
        self.ffmdpt_over_n += other.ffmdpt_over_n;
    }
}

/// A violating trade with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub n: usize,
    pub k: f64,
    pub path_id: u64,
    pub trade: usize,
    pub kind: ViolationKind,
    pub record: TradeRecord,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub label: String,
    pub execution: Execution,
    pub cells: Vec<SweepCell>,
    /// The first [`REPLAY_CAP`] violations ordered by cell, path and trade.
    pub replays: Vec<ViolationReport>,
}

impl SweepSummary {
    pub fn total_violations(&self) -> u64 {
        self.cells.iter().map(|c| c.violations).sum()
    }

    pub fn total_checked(&self) -> u64 {
        self.cells.iter().map(|c| c.checked).sum()
    }

    pub fn total_ffmdpt_over_n(&self) -> u64 {
        self.cells.iter().map(|c| c.ffmdpt_over_n).sum()
    }

    /// Plain-text report: one row per cell, totals, then replay data.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite: {}", self.label);
        let scope = match self.execution {
            Execution::Idealized => "idealized",
            Execution::Lagged => "lagged (outside the theorem's assumptions)",
        };
        let _ = writeln!(s, "execution: {scope}");
        let _ = writeln!(
            s,
            "{:>3} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10} {:>13}",
            "n",
            "k",
            "paths",
            "ties",
            "trades",
            "open",
            "gated",
            "checked",
            "violations",
            "ffmdpt_over_n"
        );
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{:>3} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10} {:>13}",
                c.n,
                c.k,
                c.paths,
                c.tie_paths,
                c.trades,
                c.end_of_data,
                c.gated,
                c.checked,
                c.violations,
                c.ffmdpt_over_n
            );
        }
        let _ = writeln!(s, "total checked: {}", self.total_checked());
        let _ = writeln!(s, "total violations: {}", self.total_violations());
        let _ = writeln!(s, "total ffmdpt over n: {}", self.total_ffmdpt_over_n());
        for (i, v) in self.replays.iter().enumerate() {
            let r = &v.record;
            let values: Vec<String> = v.values.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(
                s,
                "violation {}: n={} k={} path={} trade={} {} side={} signal={} entry={} exit={} duration={} return={} values=[{}]",
                i + 1,
                v.n,
                v.k,
                v.path_id,
                v.trade,
                v.kind.as_str(),
                r.side.as_str(),
                r.signal_index,
                r.entry_index,
                r.exit_index,
                r.duration,
                r.log_return,
                values.join(",")
            );
        }
        s
    }
}

#[derive(Default)]
struct SweepAcc {
    cells: Vec<SweepCell>,
    replays: Vec<(usize, ViolationReport)>,
}

impl SweepAcc {
    fn new(grid: &[(usize, f64)]) -> Self {
        let cells = grid
            .iter()
            .map(|&(n, k)| SweepCell {
                n,
                k,
                ..SweepCell::default()
            })
            .collect();
        Self {
            cells,
            replays: Vec::new(),
        }
    }

    fn merge(mut self, other: SweepAcc) -> Self {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
        self.replays.extend(other.replays);
        trim_replays(&mut self.replays);
        self
    }
}

fn replay_key(r: &(usize, ViolationReport)) -> (usize, u64, usize) {
    (r.0, r.1.path_id, r.1.trade)
}

fn trim_replays(replays: &mut Vec<(usize, ViolationReport)>) {
    replays.sort_by_key(replay_key);
    replays.truncate(REPLAY_CAP);
}

fn check_grid(ns: &[usize], ks: &[f64]) -> Result<Vec<(usize, f64)>> {
    let mut grid = Vec::new();
    for &n in ns {
        for &k in ks {
            BandParams::new(n, k)?;
            grid.push((n, k));
        }
    }
    if grid.is_empty() {
        return Err(Error::invalid("sweep needs at least one n and one k"));
    }
    Ok(grid)
}

/// Verifies one path for every cell of the grid, adding to `acc`.
fn sweep_path(
    acc: &mut SweepAcc,
    grid: &[(usize, f64)],
    path_id: u64,
    y: &[f64],
    execution: Execution,
) {
    let mut base: Option<BandSet> = None;
    for (cell_index, &(n, k)) in grid.iter().enumerate() {
        if y.len() < n {
            continue;
        }
        let bands = match &base {
            Some(b) if b.params.n() == n => b.with_multiplier(k),
            _ => bollinger_bands(y, BandParams::new(n, k).expect("grid was validated")),
        }
        .expect("grid was validated");
        let params = bands.params;
        let cell = &mut acc.cells[cell_index];
        cell.paths += 1;

        let bbpt = EngineConfig::new(params, Strategy::Bbpt).with_execution(execution);
        let report = run_with_bands(y, &bands, &bbpt, 0);
        let mut verdict = verdict_from_trades(y, &bands, &report.trades, execution);
        verdict.path_id = Some(path_id);

        let ffmdpt = EngineConfig::new(params, Strategy::Ffmdpt).with_execution(execution);
        let ff = run_with_bands(y, &bands, &ffmdpt, 0);
        cell.ffmdpt_trades += ff.trades.len() as u64;
        cell.ffmdpt_over_n += ff.trades.iter().filter(|t| t.duration > n).count() as u64;

        if verdict.has_tie() {
            cell.tie_paths += 1;
        } else {
            cell.trades += verdict.records.len() as u64;
            cell.end_of_data += verdict.end_of_data() as u64;
            cell.gated += verdict.gated() as u64;
            cell.checked += verdict.checked() as u64;
            cell.violations += verdict.violations.len() as u64;
            for v in &verdict.violations {
                acc.replays.push((
                    cell_index,
                    ViolationReport {
                        n,
                        k,
                        path_id,
                        trade: v.trade,
                        kind: v.kind,
                        record: verdict.records[v.trade],
                        values: y.to_vec(),
                    },
                ));
            }
            if acc.replays.len() > 4 * REPLAY_CAP {
                trim_replays(&mut acc.replays);
            }
        }
        base = Some(bands);
    }
}

fn finish(acc: SweepAcc, label: String, execution: Execution) -> SweepSummary {
    let mut replays = acc.replays;
    trim_replays(&mut replays);
    SweepSummary {
        label,
        execution,
        cells: acc.cells,
        replays: replays.into_iter().map(|(_, r)| r).collect(),
    }
}

/// Theorem check over every path of `spec` for each `(n, k)` pair, with
/// idealized execution.
pub fn exhaustive_sweep(spec: &PathSpec, ns: &[usize], ks: &[f64]) -> Result<SweepSummary> {
    let paths = enumerate_paths(spec)?;
    let grid = check_grid(ns, ks)?;
    let execution = Execution::Idealized;
    let acc = (0..paths.count())
        .into_par_iter()
        .fold(
            || (SweepAcc::new(&grid), Vec::with_capacity(spec.length)),
            |(mut acc, mut buf), id| {
                paths.fill(id, &mut buf);
                sweep_path(&mut acc, &grid, id, &buf, execution);
                (acc, buf)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(|| SweepAcc::new(&grid), SweepAcc::merge);
    let alphabet: Vec<String> = spec.alphabet.iter().map(|a| format!("{a}")).collect();
    let label = format!(
        "exhaustive alphabet=[{}] length={} start={} delta={}",
        alphabet.join(","),
        spec.length,
        spec.start_value,
        spec.delta
    );
    Ok(finish(acc, label, execution))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloConfig {
    pub seed: u64,
    pub walks: u64,
    pub length: usize,
    pub step_sd: f64,
    pub ns: Vec<usize>,
    pub ks: Vec<f64>,
    pub execution: Execution,
}

impl MonteCarloConfig {
    /// 10⁴ walks of length 500 with unit steps, `n = 20`, `k = 2`.
    pub fn standard(seed: u64) -> Self {
        Self {
            seed,
            walks: 10_000,
            length: 500,
            step_sd: 1.0,
            ns: vec![20],
            ks: vec![2.0],
            execution: Execution::Idealized,
        }
    }
}

/// Theorem check over seeded Gaussian walks. Walk `i` uses ChaCha stream `i`
/// of `seed`, so the result does not depend on scheduling.
pub fn monte_carlo_sweep(config: &MonteCarloConfig) -> Result<SweepSummary> {
    let grid = check_grid(&config.ns, &config.ks)?;
    if !(config.step_sd.is_finite() && config.step_sd >= 0.0) {
        return Err(Error::invalid(format!(
            "step_sd must be >= 0, got {}",
            config.step_sd
        )));
    }
    let acc = (0..config.walks)
        .into_par_iter()
        .fold(
            || SweepAcc::new(&grid),
            |mut acc, id| {
                let y = gen_random_walk_stream(config.seed, id, config.length, config.step_sd);
                sweep_path(&mut acc, &grid, id, &y, config.execution);
                acc
            },
        )
        .reduce(|| SweepAcc::new(&grid), SweepAcc::merge);
    let label = format!(
        "monte-carlo seed={} walks={} length={} step_sd={}",
        config.seed, config.walks, config.length, config.step_sd
    );
    Ok(finish(acc, label, config.execution))
}

/// Outcome of a lemma check whose premise may not apply to the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaCheck {
    Holds,
    Violated,
    NotApplicable,
}

impl LemmaCheck {
    fn from_bound(ok: bool) -> Self {
        if ok {
            LemmaCheck::Holds
        } else {
            LemmaCheck::Violated
        }
    }
}

/// Direction of the log move over a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Move {
    Down,
    Up,
}

/// The end value equals the start value plus the summed one-bar increments.
pub fn check_lemma1(y: &[f64], t_entry: usize, t_exit: usize) -> bool {
    if t_entry > t_exit || t_exit >= y.len() {
        return false;
    }
    let summed: f64 = (t_entry + 1..=t_exit).map(|t| y[t] - y[t - 1]).sum();
    (y[t_exit] - (y[t_entry] + summed)).abs() <= 1e-12
}

/// `n − 1` ones, then a drop to zero that triggers a long entry, then zeros.
fn lemma_entry_path(n: usize, tail: &[f64]) -> Vec<f64> {
    let mut y = vec![1.0; n - 1];
    y.push(0.0);
    y.extend_from_slice(tail);
    y
}

fn lemma_config(n: usize) -> Result<EngineConfig> {
    Ok(EngineConfig::new(BandParams::new(n, 0.5)?, Strategy::Bbpt)
        .with_execution(Execution::Idealized))
}

/// A long entry followed by a flat continuation exits after exactly `n` bars
/// with zero return.
pub fn check_lemma2(n: usize) -> Result<bool> {
    let config = lemma_config(n)?;
    let y = lemma_entry_path(n, &vec![0.0; 2 * n]);
    let report = crate::engine::run_strategy(&y, &config)?;
    Ok(match report.trades.first() {
        Some(t) => {
            t.side == Side::Long
                && t.entry_index == n - 1
                && t.exit_reason == ExitReason::CenterCross
                && t.duration == n
                && t.log_return == 0.0
        }
        None => false,
    })
}

fn window_mean_at(y: &[f64], end: usize, n: usize) -> f64 {
    rolling_mean(&y[end + 1 - n..=end], n).expect("window fits")[n - 1].expect("window is full")
}

/// Two-sided bound on the moving average at the end of the window that
/// starts at `t_entry`, when the window moves by `ε` in direction `dir`:
/// `y* − ε < mave < y*` for a drop, `y* < mave < y* + ε` for a rise.
pub fn check_lemma3_5_bounds(y: &[f64], t_entry: usize, n: usize, dir: Move) -> LemmaCheck {
    if n < 2 || t_entry + n > y.len() {
        return LemmaCheck::NotApplicable;
    }
    let end = t_entry + n - 1;
    let start = y[t_entry];
    let change = y[end] - start;
    let mave = window_mean_at(y, end, n);
    match dir {
        Move::Down if change < 0.0 => LemmaCheck::from_bound(start + change < mave && mave < start),
        Move::Up if change > 0.0 => LemmaCheck::from_bound(start < mave && mave < start + change),
        _ => LemmaCheck::NotApplicable,
    }
}

/// One-sided bound at an intermediate bar `t_prime` of the window starting
/// at `t_entry`, where `ε` is the move from entry to `t_prime`.
///
/// The lookback is the part of the `t_prime` window that precedes entry.
/// For a drop it must stay above `y* − ε` and the bound is `y* − ε < mave`.
/// For a rise it must stay below the entry moving average and the bound is
/// `mave < y* + ε`. With an empty lookback (`t_prime` at the window end) the
/// check is one side of [`check_lemma3_5_bounds`].
pub fn check_lemma4_6_bounds(
    y: &[f64],
    t_entry: usize,
    t_prime: usize,
    n: usize,
    dir: Move,
) -> LemmaCheck {
    if n < 2 || t_prime <= t_entry || t_prime >= t_entry + n || t_prime >= y.len() {
        return LemmaCheck::NotApplicable;
    }
    if t_prime + 1 < n {
        return LemmaCheck::NotApplicable;
    }
    let start = y[t_entry];
    let change = y[t_prime] - start;
    let lookback = &y[t_prime + 1 - n..t_entry];
    let mave = window_mean_at(y, t_prime, n);
    match dir {
        Move::Down if change < 0.0 => {
            if lookback.iter().all(|&v| v > start + change) {
                LemmaCheck::from_bound(start + change < mave)
            } else {
                LemmaCheck::NotApplicable
            }
        }
        Move::Up if change > 0.0 => {
            if t_entry + 1 < n {
                return LemmaCheck::NotApplicable;
            }
            let entry_mave = window_mean_at(y, t_entry, n);
            if lookback.iter().all(|&v| v < entry_mave) {
                LemmaCheck::from_bound(mave < start + change)
            } else {
                LemmaCheck::NotApplicable
            }
        }
        _ => LemmaCheck::NotApplicable,
    }
}

/// A closed BBPT trade whose precondition held earns strictly less than the
/// entry gap between the moving average and `y`. Short trades are checked
/// through the mirrored sign.
pub fn check_lemma7(trade: &Trade) -> LemmaCheck {
    if !trade.precondition_held || trade.exit_reason != ExitReason::CenterCross {
        return LemmaCheck::NotApplicable;
    }
    LemmaCheck::from_bound(trade.log_return < entry_gap(trade))
}

/// Distance from entry to the entry moving average, in the trade's favor.
pub fn entry_gap(trade: &Trade) -> f64 {
    trade.side.sign() * (trade.entry_center - trade.entry_y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Lemma8Outcome {
    /// Final window bar raised by `ε`: the trade exits after `n` bars.
    pub up_exits_at_n: bool,
    /// Final window bar lowered by `ε`: the trade is still open after `n` bars.
    pub down_stays_open: bool,
}

impl Lemma8Outcome {
    pub fn holds(&self) -> bool {
        self.up_exits_at_n && self.down_stays_open
    }
}

/// A long entry, a flat window, and a final window bar nudged by `±eps`.
pub fn check_lemma8(n: usize, eps: f64) -> Result<Lemma8Outcome> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
    }
    let config = lemma_config(n)?;
    let run = |nudge: f64| -> Result<Option<Trade>> {
        let mut tail = vec![0.0; n - 2];
        tail.extend([nudge, nudge]);
        let y = lemma_entry_path(n, &tail);
        let report = crate::engine::run_strategy(&y, &config)?;
        Ok(report.trades.into_iter().next())
    };
    let up = run(eps)?;
    let down = run(-eps)?;
    Ok(Lemma8Outcome {
        up_exits_at_n: up.is_some_and(|t| {
            t.exit_reason == ExitReason::CenterCross && t.duration == n && t.log_return > 0.0
        }),
        down_stays_open: down.is_some_and(|t| t.duration > n),
    })
}

/// Per-lemma tally for [`lemma_sweep`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LemmaTally {
    pub checked: u64,
    pub violated: u64,
    pub not_applicable: u64,
}

impl LemmaTally {
    fn add(&mut self, c: LemmaCheck) {
        match c {
            LemmaCheck::Holds => self.checked += 1,
            LemmaCheck::Violated => {
                self.checked += 1;
                self.violated += 1;
            }
            LemmaCheck::NotApplicable => self.not_applicable += 1,
        }
    }

    fn merge(&mut self, o: &LemmaTally) {
        self.checked += o.checked;
        self.violated += o.violated;
        self.not_applicable += o.not_applicable;
    }
}

/// First recorded counterexample of a lemma.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaWitness {
    pub lemma: &'static str,
    pub n: usize,
    pub path_id: u64,
    pub t_entry: usize,
    pub t_end: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSweepSummary {
    pub label: String,
    pub lemma1: LemmaTally,
    pub lemma3: LemmaTally,
    pub lemma4: LemmaTally,
    pub lemma5: LemmaTally,
    pub lemma6: LemmaTally,
    pub lemma7: LemmaTally,
    /// At most one witness per lemma, the one with the lowest `(n, path)`.
    pub witnesses: Vec<LemmaWitness>,
}

impl LemmaSweepSummary {
    pub fn tallies(&self) -> [(&'static str, LemmaTally); 6] {
        [
            ("lemma1", self.lemma1),
            ("lemma3", self.lemma3),
            ("lemma4", self.lemma4),
            ("lemma5", self.lemma5),
            ("lemma6", self.lemma6),
            ("lemma7", self.lemma7),
        ]
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite: {}", self.label);
        let _ = writeln!(
            s,
            "{:<7} {:>10} {:>9} {:>14}",
            "lemma", "checked", "violated", "not_applicable"
        );
        for (name, t) in self.tallies() {
            let _ = writeln!(
                s,
                "{:<7} {:>10} {:>9} {:>14}",
                name, t.checked, t.violated, t.not_applicable
            );
        }
        for w in &self.witnesses {
            let values: Vec<String> = w.values.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(
                s,
                "witness {}: n={} path={} entry={} end={} values=[{}]",
                w.lemma,
                w.n,
                w.path_id,
                w.t_entry,
                w.t_end,
                values.join(",")
            );
        }
        s
    }
}

#[derive(Default)]
struct LemmaAcc {
    tallies: [LemmaTally; 6],
    witnesses: Vec<LemmaWitness>,
}

impl LemmaAcc {
    fn record(&mut self, slot: usize, c: LemmaCheck, witness: impl FnOnce() -> LemmaWitness) {
        self.tallies[slot].add(c);
        if c == LemmaCheck::Violated {
            let w = witness();
            match self.witnesses.iter_mut().find(|o| o.lemma == w.lemma) {
                Some(o) if (w.n, w.path_id) < (o.n, o.path_id) => *o = w,
                Some(_) => {}
                None => self.witnesses.push(w),
            }
        }
    }

    fn merge(mut self, other: LemmaAcc) -> Self {
        for (a, b) in self.tallies.iter_mut().zip(&other.tallies) {
            a.merge(b);
        }
        for w in other.witnesses {
            self.record_witness(w);
        }
        self
    }

    fn record_witness(&mut self, w: LemmaWitness) {
        match self.witnesses.iter_mut().find(|o| o.lemma == w.lemma) {
            Some(o) if (w.n, w.path_id) < (o.n, o.path_id) => *o = w,
            Some(_) => {}
            None => self.witnesses.push(w),
        }
    }
}

const LEMMA_NAMES: [&str; 6] = ["lemma1", "lemma3", "lemma4", "lemma5", "lemma6", "lemma7"];

fn lemma_path(acc: &mut LemmaAcc, ns: &[usize], k: f64, path_id: u64, y: &[f64]) {
    for &n in ns {
        if y.len() < n {
            continue;
        }
        let witness = |slot: usize, t_entry: usize, t_end: usize| LemmaWitness {
            lemma: LEMMA_NAMES[slot],
            n,
            path_id,
            t_entry,
            t_end,
            values: y.to_vec(),
        };
        for t in 0..=y.len() - n {
            let end = t + n - 1;
            acc.record(1, check_lemma3_5_bounds(y, t, n, Move::Down), || {
                witness(1, t, end)
            });
            acc.record(3, check_lemma3_5_bounds(y, t, n, Move::Up), || {
                witness(3, t, end)
            });
            for tp in t + 1..(end + 1).min(y.len()) {
                acc.record(2, check_lemma4_6_bounds(y, t, tp, n, Move::Down), || {
                    witness(2, t, tp)
                });
                acc.record(4, check_lemma4_6_bounds(y, t, tp, n, Move::Up), || {
                    witness(4, t, tp)
                });
            }
        }
        let params = BandParams::new(n, k).expect("validated");
        let bands = bollinger_bands(y, params).expect("length checked");
        let config = EngineConfig::new(params, Strategy::Bbpt).with_execution(Execution::Idealized);
        let report = run_with_bands(y, &bands, &config, 0);
        let tie = verdict_from_trades(y, &bands, &report.trades, Execution::Idealized).has_tie();
        if tie {
            continue;
        }
        for t in &report.trades {
            let ok = check_lemma1(y, t.entry_index, t.exit_index);
            acc.record(0, LemmaCheck::from_bound(ok), || {
                witness(0, t.entry_index, t.exit_index)
            });
            acc.record(5, check_lemma7(t), || {
                witness(5, t.entry_index, t.exit_index)
            });
        }
    }
}

/// Lemmas 1 and 3–7 over every path of `spec` and every window size in
/// `ns`. Lemma 7 is checked on the BBPT trades made with multiplier `k`.
pub fn lemma_sweep(spec: &PathSpec, ns: &[usize], k: f64) -> Result<LemmaSweepSummary> {
    let paths = enumerate_paths(spec)?;
    check_grid(ns, &[k])?;
    let acc = (0..paths.count())
        .into_par_iter()
        .fold(
            || (LemmaAcc::default(), Vec::with_capacity(spec.length)),
            |(mut acc, mut buf), id| {
                paths.fill(id, &mut buf);
                lemma_path(&mut acc, ns, k, id, &buf);
                (acc, buf)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(LemmaAcc::default, LemmaAcc::merge);
    let mut witnesses = acc.witnesses;
    witnesses.sort_by_key(|w| LEMMA_NAMES.iter().position(|n| *n == w.lemma));
    let [lemma1, lemma3, lemma4, lemma5, lemma6, lemma7] = acc.tallies;
    Ok(LemmaSweepSummary {
        label: format!("lemma sweep length={} ns={:?} k={}", spec.length, ns, k),
        lemma1,
        lemma3,
        lemma4,
        lemma5,
        lemma6,
        lemma7,
        witnesses,
    })
}
