//! WebAssembly bindings for the static page in `www/`.
//!
//! Each export returns a JSON string. The `*_json` functions without the
//! `wasm_` prefix carry the logic and run natively, which is how the tests
//! exercise them.

use bandreg::engine::{run_strategy, Trade};
use bandreg::models::ModelChain;
use bandreg::theorem::gen_random_walk;
use bandreg::{bollinger_bands, BandParams, EngineConfig, Execution, Strategy};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct BandsOut {
    y: Vec<f64>,
    center: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
    lower: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct BacktestOut<'a> {
    strategy: &'static str,
    trades: &'a [Trade],
    strategy_return: f64,
    avg_win_duration: Option<f64>,
    avg_loss_duration: Option<f64>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Seeded random walk with unit steps, scaled by `step`.
pub fn walk_json(seed: u64, length: usize, step: f64) -> Result<String, String> {
    if !(step.is_finite() && step >= 0.0) {
        return Err(format!("step must be >= 0, got {step}"));
    }
    to_json(&gen_random_walk(seed, length, step))
}

pub fn bands_json(y: &[f64], n: usize, k: f64) -> Result<String, String> {
    let params = BandParams::new(n, k).map_err(|e| e.to_string())?;
    let b = bollinger_bands(y, params).map_err(|e| e.to_string())?;
    to_json(&BandsOut {
        y: y.to_vec(),
        center: b.center,
        upper: b.upper,
        lower: b.lower,
    })
}

/// `from` is one of `q`, `theta`, `lambda`, `n`.
pub fn model_chain_json(from: &str, value: f64) -> Result<String, String> {
    let chain = match from {
        "q" => ModelChain::from_q(value),
        "theta" => ModelChain::from_theta(value),
        "lambda" => ModelChain::from_lambda(value),
        "n" => ModelChain::from_window(value),
        other => return Err(format!("unknown parameter `{other}`")),
    }
    .map_err(|e| e.to_string())?;
    to_json(&chain)
}

pub fn backtest_json(
    y: &[f64],
    n: usize,
    k: f64,
    strategy: &str,
    idealized: bool,
) -> Result<String, String> {
    let strategy: Strategy = strategy
        .parse()
        .map_err(|e: bandreg::Error| e.to_string())?;
    let execution = if idealized {
        Execution::Idealized
    } else {
        Execution::Lagged
    };
    let params = BandParams::new(n, k).map_err(|e| e.to_string())?;
    let config = EngineConfig::new(params, strategy).with_execution(execution);
    let r = run_strategy(y, &config).map_err(|e| e.to_string())?;
    to_json(&BacktestOut {
        strategy: strategy.as_str(),
        trades: &r.trades,
        strategy_return: r.strategy_return.value,
        avg_win_duration: r.durations.avg_win_duration,
        avg_loss_duration: r.durations.avg_loss_duration,
    })
}

#[wasm_bindgen]
pub fn wasm_walk(seed: u64, length: usize, step: f64) -> Result<String, JsError> {
    walk_json(seed, length, step).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn wasm_bands(y: &[f64], n: usize, k: f64) -> Result<String, JsError> {
    bands_json(y, n, k).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn wasm_model_chain(from: &str, value: f64) -> Result<String, JsError> {
    model_chain_json(from, value).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn wasm_backtest(
    y: &[f64],
    n: usize,
    k: f64,
    strategy: &str,
    idealized: bool,
) -> Result<String, JsError> {
    backtest_json(y, n, k, strategy, idealized).map_err(|e| JsError::new(&e))
}
