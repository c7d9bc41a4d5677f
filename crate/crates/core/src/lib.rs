//! Bollinger Bands treated as an intercept-only rolling regression, the
//! smoothing-model equivalences behind them, and two pairs-trading
//! strategies built on the bands.
//!
//! Modules, bottom-up:
//!
//! - [`series`]: price ingestion, date alignment, log price ratio.
//! - [`bands`]: rolling mean/sd, Bollinger Bands, rolling OLS intercept fit,
//!   prediction intervals.
//! - [`models`]: SES, ARIMA(0,1,1), random walk plus noise and the maps
//!   between their parameters.
//! - [`engine`]: BBPT and FFMDPT simulation, trade ledger, return and
//!   duration statistics.
//! - [`theorem`]: exhaustive and Monte-Carlo checks of the return/duration
//!   relationship for BBPT trades and its supporting moving-average bounds.
//! - [`optimizer`]: grid search over the window size and walk-forward
//!   comparison tables.

pub mod bands;
pub mod engine;
pub mod error;
pub mod models;
pub mod optimizer;
pub mod series;
pub mod theorem;

pub use bands::{bollinger_bands, BandParams, BandSet};
pub use engine::{BacktestReport, EngineConfig, Execution, Side, Strategy, Trade, Weighting};
pub use error::{Error, Result};
pub use series::{align_pair, parse_price_csv, LogRatioSeries, PriceSeries};
