//! `bandreg` command-line front end.
//!
//! Every command writes its results under `--out DIR` and echoes a short
//! human-readable summary to stdout. Outputs hold no timestamps or other
//! run-dependent data, so identical inputs give byte-identical files.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bandreg::bands::write_band_csv;
use bandreg::engine::{
    compare_strategies, run_strategy, write_ledger_csv, BacktestReport, StrategyComparison, Trade,
};
use bandreg::models::ModelChain;
use bandreg::optimizer::{rows_to_csv, summarize_tables, walk_forward, WalkForwardPlan};
use bandreg::theorem::{
    exhaustive_sweep, monte_carlo_sweep, MonteCarloConfig, PathSpec, SweepSummary,
};
use bandreg::{
    align_pair, bollinger_bands, parse_price_csv, BandParams, EngineConfig, Execution,
    LogRatioSeries, Strategy, Weighting,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const EXIT_OK: u8 = 0;
/// The command ran but found theorem violations.
pub const EXIT_VIOLATIONS: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bandreg",
    version,
    about = "Bollinger Bands, smoothing-model maps and pairs-trading backtests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bollinger Bands of the log price ratio ln(z) − ln(x).
    Bands {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trade ledger and summary for one strategy.
    Backtest {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// BBPT and FFMDPT side by side on the same inputs.
    Compare {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Walk-forward window selection from a plan file.
    Optimize {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the return/duration relationship of BBPT trades.
    Verify {
        #[arg(long, value_enum)]
        mode: VerifyMode,
        /// Window sizes, comma separated. Defaults: 3,4,5 exhaustive, 20 Monte-Carlo.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Multipliers, comma separated. Defaults: 0.5,1,2 exhaustive, 2 Monte-Carlo.
        #[arg(long, value_delimiter = ',')]
        k: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ExecutionArg::Idealized)]
        execution: ExecutionArg,
        /// Required in montecarlo mode.
        #[arg(long)]
        seed: Option<u64>,
        /// Path length (exhaustive: number of steps, default 14; Monte-Carlo: default 500).
        #[arg(long)]
        length: Option<usize>,
        /// Number of walks in montecarlo mode.
        #[arg(long, default_value_t = 10_000)]
        walks: u64,
        /// Step size: the alphabet is {−step, 0, +step} (exhaustive) or the
        /// Gaussian step sd (Monte-Carlo).
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// The q → θ → λ → n parameter chain from any one entry point.
    Modelmap {
        #[arg(value_enum)]
        from: MapFrom,
        #[arg(allow_hyphen_values = true)]
        value: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct PairArgs {
    /// Price CSV of the numerator asset.
    #[arg(long)]
    z: PathBuf,
    /// Price CSV of the denominator asset.
    #[arg(long)]
    x: PathBuf,
}

#[derive(Debug, Args)]
struct EngineArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: f64,
    #[arg(long, value_enum, default_value_t = ExecutionArg::Lagged)]
    execution: ExecutionArg,
    #[arg(long, value_enum, default_value_t = WeightingArg::Mean)]
    weighting: WeightingArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Bbpt,
    Ffmdpt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExecutionArg {
    Lagged,
    Idealized,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightingArg {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VerifyMode {
    Exhaustive,
    Montecarlo,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MapFrom {
    Q,
    Theta,
    Lambda,
    N,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Bbpt => Strategy::Bbpt,
            StrategyArg::Ffmdpt => Strategy::Ffmdpt,
        }
    }
}

impl From<ExecutionArg> for Execution {
    fn from(e: ExecutionArg) -> Self {
        match e {
            ExecutionArg::Lagged => Execution::Lagged,
            ExecutionArg::Idealized => Execution::Idealized,
        }
    }
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Mean => Weighting::EqualPerTrade,
            WeightingArg::Sum => Weighting::Sum,
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = if e.use_stderr() {
                e.render().to_string()
            } else {
                e.to_string()
            };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<u8> {
    match command {
        Command::Bands { pair, n, k, out } => cmd_bands(&pair, n, k, &out, stdout),
        Command::Backtest {
            pair,
            strategy,
            engine,
            out,
        } => cmd_backtest(&pair, strategy.into(), &engine, &out, stdout),
        Command::Compare { pair, engine, out } => cmd_compare(&pair, &engine, &out, stdout),
        Command::Optimize { pair, plan, out } => cmd_optimize(&pair, &plan, &out, stdout),
        Command::Verify {
            mode,
            n,
            k,
            execution,
            seed,
            length,
            walks,
            step,
            out,
        } => {
            let execution = execution.into();
            let summary = match mode {
                VerifyMode::Exhaustive => {
                    if execution != Execution::Idealized {
                        bail!("exhaustive mode runs with idealized execution only");
                    }
                    let ns = if n.is_empty() { vec![3, 4, 5] } else { n };
                    let ks = if k.is_empty() { vec![0.5, 1.0, 2.0] } else { k };
                    let spec = PathSpec::ternary(length.unwrap_or(14), step)?;
                    exhaustive_sweep(&spec, &ns, &ks)?
                }
                VerifyMode::Montecarlo => {
                    let Some(seed) = seed else {
                        bail!("montecarlo mode needs --seed");
                    };
                    let config = MonteCarloConfig {
                        seed,
                        walks,
                        length: length.unwrap_or(500),
                        step_sd: step,
                        ns: if n.is_empty() { vec![20] } else { n },
                        ks: if k.is_empty() { vec![2.0] } else { k },
                        execution,
                    };
                    monte_carlo_sweep(&config)?
                }
            };
            cmd_verify_report(&summary, &out, stdout)
        }
        Command::Modelmap { from, value, out } => cmd_modelmap(from, value, out.as_deref(), stdout),
    }
}

fn asset_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_pair(pair: &PairArgs) -> Result<LogRatioSeries> {
    let z = parse_price_csv(&pair.z, &asset_id(&pair.z))?;
    let x = parse_price_csv(&pair.x, &asset_id(&pair.x))?;
    Ok(align_pair(&z, &x)?)
}

fn out_file(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let mut f = out_file(dir, name)?;
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn cmd_bands(pair: &PairArgs, n: usize, k: f64, out: &Path, stdout: &mut dyn Write) -> Result<u8> {
    let series = load_pair(pair)?;
    let bands = bollinger_bands(series.values(), BandParams::new(n, k)?)?;
    let mut f = out_file(out, "bands.csv")?;
    write_band_csv(&series, &bands, &mut f)?;
    f.flush()?;
    writeln!(
        stdout,
        "{} rows, bands defined from row {}; wrote bands.csv",
        series.len(),
        bands.valid_from + 1
    )?;
    Ok(EXIT_OK)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v}"))
}

fn report_text(series: &LogRatioSeries, report: &BacktestReport) -> String {
    let c = &report.config;
    let d = &report.durations;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "pair: {}/{}",
        series.numerator_id(),
        series.denominator_id()
    );
    let _ = writeln!(
        s,
        "strategy: {} n={} k={} execution={} weighting={}",
        c.strategy.as_str(),
        c.params.n(),
        c.params.k(),
        c.execution.as_str(),
        c.weighting.as_str()
    );
    let _ = writeln!(
        s,
        "trades: {} (wins {}, losses {})",
        report.trades.len(),
        d.n_win,
        d.n_loss
    );
    let ret = if report.strategy_return.empty {
        "0 (no trades)".to_string()
    } else {
        format!("{}", report.strategy_return.value)
    };
    let _ = writeln!(s, "strategy return: {ret}");
    let _ = writeln!(
        s,
        "average winning duration: {}",
        fmt_opt(d.avg_win_duration)
    );
    let _ = writeln!(
        s,
        "average losing duration: {}",
        fmt_opt(d.avg_loss_duration)
    );
    s
}

#[derive(Serialize)]
struct BacktestJson<'a> {
    numerator: &'a str,
    denominator: &'a str,
    report: &'a BacktestReport,
}

fn cmd_backtest(
    pair: &PairArgs,
    strategy: Strategy,
    engine: &EngineArgs,
    out: &Path,
    stdout: &mut dyn Write,
) -> Result<u8> {
    let series = load_pair(pair)?;
    let config = EngineConfig::new(BandParams::new(engine.n, engine.k)?, strategy)
        .with_execution(engine.execution.into())
        .with_weighting(engine.weighting.into());
    let report = run_strategy(series.values(), &config)?;
    let mut f = out_file(out, "ledger.csv")?;
    write_ledger_csv(&series, &report.trades, &mut f)?;
    f.flush()?;
    let text = report_text(&series, &report);
    write_text(out, "report.txt", &text)?;
    write_json(
        out,
        "report.json",
        &BacktestJson {
            numerator: series.numerator_id(),
            denominator: series.denominator_id(),
            report: &report,
        },
    )?;
    stdout.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

const COMPARE_HEADER: &str = "signal_date,side,bbpt_exit_date,bbpt_exit_reason,bbpt_return,bbpt_duration,ffmdpt_exit_date,ffmdpt_exit_reason,ffmdpt_return,ffmdpt_duration";

fn compare_csv(series: &LogRatioSeries, cmp: &StrategyComparison) -> String {
    let date = |i: usize| series.dates()[i].format("%Y-%m-%d").to_string();
    let cells = |t: Option<&Trade>| match t {
        Some(t) => format!(
            "{},{},{},{}",
            date(t.exit_index),
            t.exit_reason.as_str(),
            t.log_return,
            t.duration
        ),
        None => ",,,".to_string(),
    };
    let mut s = String::new();
    let _ = writeln!(s, "{COMPARE_HEADER}");
    for p in &cmp.pairs {
        let b = p.bbpt.map(|i| &cmp.bbpt.trades[i]);
        let f = p.ffmdpt.map(|i| &cmp.ffmdpt.trades[i]);
        let side = b.or(f).map(|t| t.side.as_str()).unwrap_or("");
        let _ = writeln!(
            s,
            "{},{},{},{}",
            date(p.signal_index),
            side,
            cells(b),
            cells(f)
        );
    }
    s
}

fn cmd_compare(
    pair: &PairArgs,
    engine: &EngineArgs,
    out: &Path,
    stdout: &mut dyn Write,
) -> Result<u8> {
    let series = load_pair(pair)?;
    let cmp = compare_strategies(
        series.values(),
        BandParams::new(engine.n, engine.k)?,
        engine.execution.into(),
        engine.weighting.into(),
    )?;
    write_text(out, "compare.csv", &compare_csv(&series, &cmp))?;
    let shared = cmp
        .pairs
        .iter()
        .filter(|p| p.bbpt.is_some() && p.ffmdpt.is_some())
        .count();
    let mut text = String::new();
    text.push_str(&report_text(&series, &cmp.bbpt));
    text.push_str(&report_text(&series, &cmp.ffmdpt));
    let _ = writeln!(text, "shared entries: {shared} of {}", cmp.pairs.len());
    let _ = writeln!(
        text,
        "return difference (FFMDPT - BBPT): {}",
        cmp.return_difference
    );
    write_text(out, "compare.txt", &text)?;
    write_json(out, "compare.json", &cmp)?;
    stdout.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_optimize(
    pair: &PairArgs,
    plan_path: &Path,
    out: &Path,
    stdout: &mut dyn Write,
) -> Result<u8> {
    let series = load_pair(pair)?;
    let text = fs::read_to_string(plan_path)
        .with_context(|| format!("reading plan {}", plan_path.display()))?;
    let plan = WalkForwardPlan::parse(&text)?;
    let rows = walk_forward(&series, &plan)?;
    let table = summarize_tables(&rows, plan.k);
    write_text(out, "table.txt", &table)?;
    write_text(out, "table.csv", &rows_to_csv(&rows)?)?;
    stdout.write_all(table.as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_verify_report(summary: &SweepSummary, out: &Path, stdout: &mut dyn Write) -> Result<u8> {
    let text = summary.render();
    write_text(out, "verify.txt", &text)?;
    write_json(out, "verify.json", summary)?;
    stdout.write_all(text.as_bytes())?;
    Ok(if summary.total_violations() > 0 {
        EXIT_VIOLATIONS
    } else {
        EXIT_OK
    })
}

fn cmd_modelmap(
    from: MapFrom,
    value: f64,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<u8> {
    let chain = match from {
        MapFrom::Q => ModelChain::from_q(value),
        MapFrom::Theta => ModelChain::from_theta(value),
        MapFrom::Lambda => ModelChain::from_lambda(value),
        MapFrom::N => ModelChain::from_window(value),
    }?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "q      = {}",
        chain.q.map_or_else(
            || "undefined (a random walk plus noise needs theta in (-1, 0))".to_string(),
            |v| format!("{v}")
        )
    );
    let _ = writeln!(text, "theta  = {}", fmt_opt(chain.theta));
    let _ = writeln!(text, "lambda = {}", fmt_opt(chain.lambda));
    let _ = writeln!(text, "n      = {}", fmt_opt(chain.n));
    if let Some(dir) = out {
        write_text(dir, "modelmap.txt", &text)?;
    }
    stdout.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}
