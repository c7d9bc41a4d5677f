//! Pairs-trading simulation on the log price ratio.
//!
//! Both strategies enter when `y` touches or crosses a band: a long position
//! at or below the lower band, a short position at or above the upper band.
//! BBPT exits when `y` returns to the moving average. FFMDPT exits when `y`
//! returns to the moving average *as it stood at entry* (the fixed forecast),
//! or after `n` periods, whichever comes first.
//!
//! Returns are log returns of the ratio: `exit_y − entry_y` for a long trade
//! and its negative for a short one. Duration counts bars from entry to exit
//! inclusive.

use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::bands::{bollinger_bands, BandParams, BandSet};
use crate::error::{Error, Result};
use crate::series::{format_date, LogRatioSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Long,
    Short,
}

impl Side {
    /// +1 for long, −1 for short.
    pub fn sign(self) -> f64 {
        match self {
            Side::Long => 1.0,
            Side::Short => -1.0,
        }
    }

    pub fn flipped(self) -> Side {
        match self {
            Side::Long => Side::Short,
            Side::Short => Side::Long,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Long => "long",
            Side::Short => "short",
        }
    }

    /// Whether `y` has reached `target` from this side (touch counts).
    fn reached(self, y: f64, target: f64) -> bool {
        match self {
            Side::Long => y >= target,
            Side::Short => y <= target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitReason {
    CenterCross,
    FixedForecastCross,
    MaxDuration,
    EndOfData,
}

impl ExitReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitReason::CenterCross => "center-cross",
            ExitReason::FixedForecastCross => "fixed-forecast-cross",
            ExitReason::MaxDuration => "max-duration",
            ExitReason::EndOfData => "end-of-data",
        }
    }
}

/// When orders fill relative to their signal bar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Entry and exit fill one bar after their signals, at that bar's value.
    Lagged,
    /// Fills at the signal bar's value with no slippage.
    Idealized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Strategy {
    Bbpt,
    Ffmdpt,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Bbpt => "BBPT",
            Strategy::Ffmdpt => "FFMDPT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Each trade weighted `1 / number of trades`.
    EqualPerTrade,
    Sum,
}

impl Execution {
    pub fn as_str(self) -> &'static str {
        match self {
            Execution::Lagged => "lagged",
            Execution::Idealized => "idealized",
        }
    }
}

impl Weighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::EqualPerTrade => "mean",
            Weighting::Sum => "sum",
        }
    }
}

impl FromStr for Execution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lagged" => Ok(Execution::Lagged),
            "idealized" => Ok(Execution::Idealized),
            other => Err(Error::invalid(format!(
                "unknown execution `{other}` (expected lagged or idealized)"
            ))),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bbpt" => Ok(Strategy::Bbpt),
            "ffmdpt" => Ok(Strategy::Ffmdpt),
            other => Err(Error::invalid(format!(
                "unknown strategy `{other}` (expected bbpt or ffmdpt)"
            ))),
        }
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" | "equal" => Ok(Weighting::EqualPerTrade),
            "sum" => Ok(Weighting::Sum),
            other => Err(Error::invalid(format!(
                "unknown weighting `{other}` (expected mean or sum)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngineConfig {
    pub params: BandParams,
    pub execution: Execution,
    pub strategy: Strategy,
    pub weighting: Weighting,
}

impl EngineConfig {
    pub fn new(params: BandParams, strategy: Strategy) -> Self {
        Self {
            params,
            execution: Execution::Lagged,
            strategy,
            weighting: Weighting::EqualPerTrade,
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }

    fn lag(&self) -> usize {
        match self.execution {
            Execution::Lagged => 1,
            Execution::Idealized => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trade {
    pub side: Side,
    pub signal_index: usize,
    pub entry_index: usize,
    pub exit_index: usize,
    pub entry_y: f64,
    pub exit_y: f64,
    /// Moving average at entry; the fixed forecast of FFMDPT.
    pub entry_center: f64,
    pub exit_reason: ExitReason,
    pub log_return: f64,
    pub duration: usize,
    /// No earlier trade completed within the `n` bars preceding entry.
    pub precondition_held: bool,
}

impl Trade {
    pub fn is_win(&self) -> bool {
        self.log_return >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyReturn {
    pub value: f64,
    /// No trades were made; `value` is 0.
    pub empty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DurationStats {
    pub avg_win_duration: Option<f64>,
    pub avg_loss_duration: Option<f64>,
    pub n_win: usize,
    pub n_loss: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub config: EngineConfig,
    pub trades: Vec<Trade>,
    pub strategy_return: StrategyReturn,
    pub durations: DurationStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Signal {
    pub index: usize,
    pub side: Side,
}

/// Entry side implied by bar `i`, if any. A flat window (zero sigma) has
/// coincident bands and produces no signal.
fn signal_at(y: &[f64], bands: &BandSet, i: usize) -> Option<Side> {
    let p = bands.at(i)?;
    if p.sigma <= 0.0 {
        return None;
    }
    if y[i] >= p.upper {
        Some(Side::Short)
    } else if y[i] <= p.lower {
        Some(Side::Long)
    } else {
        None
    }
}

/// Band-touch signals at bars where no position is open.
pub fn generate_signals(y: &[f64], bands: &BandSet, in_position: &[bool]) -> Vec<Signal> {
    (0..y.len().min(bands.len()))
        .filter(|&i| !in_position.get(i).copied().unwrap_or(false))
        .filter_map(|i| signal_at(y, bands, i).map(|side| Signal { index: i, side }))
        .collect()
}

fn check_inputs(y: &[f64], n: usize) -> Result<()> {
    if y.len() < n {
        return Err(Error::SeriesTooShort { len: y.len(), n });
    }
    Ok(())
}

/// Runs the configured strategy with signals allowed from the first defined
/// band bar.
pub fn run_strategy(y: &[f64], config: &EngineConfig) -> Result<BacktestReport> {
    run_strategy_from(y, config, 0)
}

/// Runs the configured strategy, ignoring entry signals before
/// `first_signal_index`.
pub fn run_strategy_from(
    y: &[f64],
    config: &EngineConfig,
    first_signal_index: usize,
) -> Result<BacktestReport> {
    check_inputs(y, config.params.n())?;
    let bands = bollinger_bands(y, config.params)?;
    Ok(run_with_bands(y, &bands, config, first_signal_index))
}

pub fn run_bbpt(y: &[f64], config: &EngineConfig) -> Result<BacktestReport> {
    if config.strategy != Strategy::Bbpt {
        return Err(Error::invalid("run_bbpt needs strategy = BBPT"));
    }
    run_strategy(y, config)
}

pub fn run_ffmdpt(y: &[f64], config: &EngineConfig) -> Result<BacktestReport> {
    if config.strategy != Strategy::Ffmdpt {
        return Err(Error::invalid("run_ffmdpt needs strategy = FFMDPT"));
    }
    run_strategy(y, config)
}

/// Simulation over precomputed bands (which must come from `y` and
/// `config.params`).
pub fn run_with_bands(
    y: &[f64],
    bands: &BandSet,
    config: &EngineConfig,
    first_signal_index: usize,
) -> BacktestReport {
    let trades = simulate(y, bands, config, first_signal_index);
    BacktestReport {
        config: *config,
        strategy_return: strategy_return(&trades, config.weighting),
        durations: duration_stats(&trades),
        trades,
    }
}

#[allow(clippy::needless_range_loop)]
fn simulate(
    y: &[f64],
    bands: &BandSet,
    config: &EngineConfig,
    first_signal_index: usize,
) -> Vec<Trade> {
    let len = y.len();
    let n = config.params.n();
    let lag = config.lag();
    let mut trades: Vec<Trade> = Vec::new();
    let mut search_from = bands.valid_from.max(first_signal_index);

    while let Some((signal, side)) =
        (search_from..len.saturating_sub(lag)).find_map(|i| signal_at(y, bands, i).map(|s| (i, s)))
    {
        let entry = signal + lag;
        let entry_y = y[entry];
        let entry_center = bands.center[entry].expect("entry bar lies in the defined band region");
        let forced = entry + n - 1;

        let mut exit = None;
        for j in (signal + 1).max(entry)..len {
            let target = match config.strategy {
                Strategy::Bbpt => bands.center[j].expect("defined after entry"),
                Strategy::Ffmdpt => entry_center,
            };
            if side.reached(y[j], target) {
                let fill = j + lag;
                let reason = match config.strategy {
                    Strategy::Bbpt => ExitReason::CenterCross,
                    Strategy::Ffmdpt => ExitReason::FixedForecastCross,
                };
                if config.strategy == Strategy::Ffmdpt && fill > forced {
                    exit = Some((forced, ExitReason::MaxDuration));
                } else if fill < len {
                    exit = Some((fill, reason));
                }
                break;
            }
            if config.strategy == Strategy::Ffmdpt && j == forced {
                exit = Some((forced, ExitReason::MaxDuration));
                break;
            }
        }
        let (exit_index, exit_reason) = exit.unwrap_or((len - 1, ExitReason::EndOfData));
        let exit_y = y[exit_index];
        let precondition_held = trades.last().is_none_or(|prev| prev.exit_index + n < entry);
        trades.push(Trade {
            side,
            signal_index: signal,
            entry_index: entry,
            exit_index,
            entry_y,
            exit_y,
            entry_center,
            exit_reason,
            log_return: side.sign() * (exit_y - entry_y),
            duration: exit_index - entry + 1,
            precondition_held,
        });
        // The next entry must fill strictly after this exit.
        search_from = (exit_index + 1).saturating_sub(lag).max(signal + 1);
    }
    trades
}

/// Mean (equal weights) or sum of trade log returns. An empty ledger returns
/// 0 with `empty` set.
pub fn strategy_return(trades: &[Trade], weighting: Weighting) -> StrategyReturn {
    if trades.is_empty() {
        return StrategyReturn {
            value: 0.0,
            empty: true,
        };
    }
    let total: f64 = trades.iter().map(|t| t.log_return).sum();
    let value = match weighting {
        Weighting::EqualPerTrade => total / trades.len() as f64,
        Weighting::Sum => total,
    };
    StrategyReturn {
        value,
        empty: false,
    }
}

/// Average durations of winning (return ≥ 0) and losing trades.
pub fn duration_stats(trades: &[Trade]) -> DurationStats {
    let (wins, losses): (Vec<&Trade>, Vec<&Trade>) = trades.iter().partition(|t| t.is_win());
    let avg = |ts: &[&Trade]| {
        (!ts.is_empty())
            .then(|| ts.iter().map(|t| t.duration as f64).sum::<f64>() / ts.len() as f64)
    };
    DurationStats {
        avg_win_duration: avg(&wins),
        avg_loss_duration: avg(&losses),
        n_win: wins.len(),
        n_loss: losses.len(),
    }
}

/// Both strategies on the same inputs, with trades paired by signal bar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyComparison {
    pub bbpt: BacktestReport,
    pub ffmdpt: BacktestReport,
    pub pairs: Vec<TradePair>,
    /// FFMDPT return minus BBPT return.
    pub return_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradePair {
    pub signal_index: usize,
    pub bbpt: Option<usize>,
    pub ffmdpt: Option<usize>,
}

pub fn compare_strategies(
    y: &[f64],
    params: BandParams,
    execution: Execution,
    weighting: Weighting,
) -> Result<StrategyComparison> {
    check_inputs(y, params.n())?;
    let bands = bollinger_bands(y, params)?;
    let cfg = |strategy| {
        EngineConfig::new(params, strategy)
            .with_execution(execution)
            .with_weighting(weighting)
    };
    let bbpt = run_with_bands(y, &bands, &cfg(Strategy::Bbpt), 0);
    let ffmdpt = run_with_bands(y, &bands, &cfg(Strategy::Ffmdpt), 0);

    let mut pairs = Vec::new();
    let (mut a, mut b) = (0, 0);
    while a < bbpt.trades.len() || b < ffmdpt.trades.len() {
        let sa = bbpt.trades.get(a).map(|t| t.signal_index);
        let sb = ffmdpt.trades.get(b).map(|t| t.signal_index);
        let pair = match (sa, sb) {
            (Some(x), Some(z)) if x == z => {
                a += 1;
                b += 1;
                TradePair {
                    signal_index: x,
                    bbpt: Some(a - 1),
                    ffmdpt: Some(b - 1),
                }
            }
            (Some(x), Some(z)) if x < z => {
                a += 1;
                TradePair {
                    signal_index: x,
                    bbpt: Some(a - 1),
                    ffmdpt: None,
                }
            }
            (Some(x), None) => {
                a += 1;
                TradePair {
                    signal_index: x,
                    bbpt: Some(a - 1),
                    ffmdpt: None,
                }
            }
            (_, Some(z)) => {
                b += 1;
                TradePair {
                    signal_index: z,
                    bbpt: None,
                    ffmdpt: Some(b - 1),
                }
            }
            (None, None) => unreachable!(),
        };
        pairs.push(pair);
    }
    let return_difference = ffmdpt.strategy_return.value - bbpt.strategy_return.value;
    Ok(StrategyComparison {
        bbpt,
        ffmdpt,
        pairs,
        return_difference,
    })
}

pub const LEDGER_HEADER: &str =
    "side,signal_date,entry_date,exit_date,entry_y,exit_y,exit_reason,log_return,duration";

pub fn write_ledger_csv<W: Write>(
    series: &LogRatioSeries,
    trades: &[Trade],
    mut out: W,
) -> std::io::Result<()> {
    let date = |i: usize| format_date(series.dates()[i]);
    writeln!(out, "{LEDGER_HEADER}")?;
    for t in trades {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            t.side.as_str(),
            date(t.signal_index),
            date(t.entry_index),
            date(t.exit_index),
            t.entry_y,
            t.exit_y,
            t.exit_reason.as_str(),
            t.log_return,
            t.duration
        )?;
    }
    Ok(())
}
