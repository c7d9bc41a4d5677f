//! Simple exponential smoothing, the ARIMA(0,1,1) forecast and the parameter
//! maps between random-walk-plus-noise, ARIMA(0,1,1), SES and the n-period
//! moving average.
//!
//! Sign convention for the MA coefficient: `y_t = y_{t-1} + θ ε_{t-1} + ε_t`,
//! under which the ARIMA(0,1,1) forecast equals SES with `λ = 1 - θ`.

use serde::Serialize;

use crate::error::{Error, Result};

/// One SES update, `λ·y + (1 − λ)·ŷ`. This operand order is shared by the
/// ARIMA(0,1,1) step so that the two agree bit for bit.
#[inline]
pub fn ses_step(lambda: f64, forecast: f64, y_new: f64) -> f64 {
    lambda * y_new + (1.0 - lambda) * forecast
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SesState {
    lambda: f64,
    forecast: f64,
    initialized: bool,
}

impl SesState {
    /// Uninitialized state; the first observation becomes the first forecast.
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 2.0) {
            return Err(Error::invalid(format!(
                "SES weight must lie in (0, 2), got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            forecast: 0.0,
            initialized: false,
        })
    }

    pub fn with_forecast(lambda: f64, forecast: f64) -> Result<Self> {
        let mut s = Self::new(lambda)?;
        s.forecast = forecast;
        s.initialized = true;
        Ok(s)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Current one-step-ahead forecast, `None` before the first observation.
    pub fn forecast(&self) -> Option<f64> {
        self.initialized.then_some(self.forecast)
    }
}

pub fn ses_forecast_step(state: SesState, y_new: f64) -> SesState {
    let forecast = if state.initialized {
        ses_step(state.lambda, state.forecast, y_new)
    } else {
        y_new
    };
    SesState {
        forecast,
        initialized: true,
        ..state
    }
}

/// Weight `λ(1 − λ)^j` carried by the observation aged `j`, for `j < horizon`.
pub fn ses_weights(lambda: f64, horizon: usize) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda < 2.0) {
        return Err(Error::invalid(format!(
            "SES weight must lie in (0, 2), got {lambda}"
        )));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let decay = 1.0 - lambda;
    Ok((0..horizon)
        .map(|j| lambda * decay.powi(j as i32))
        .collect())
}

/// Weighted average age of the observations in an SES forecast, `(1 − λ)/λ`.
pub fn ses_weighted_age(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid(format!(
            "weighted age needs λ in (0, 1], got {lambda}"
        )));
    }
    Ok((1.0 - lambda) / lambda)
}

/// Weighted average age of an n-period moving average, `(n − 1)/2`.
pub fn mave_weighted_age(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("window size must be >= 1"));
    }
    Ok((n as f64 - 1.0) / 2.0)
}

/// SES weight whose weighted age matches an n-period moving average:
/// `λ = 2/(n + 1)`. `n` may be fractional.
pub fn lambda_for_window(n: f64) -> Result<f64> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::invalid(format!("window size must be >= 1, got {n}")));
    }
    Ok(2.0 / (n + 1.0))
}

/// Inverse of [`lambda_for_window`], `n = 2/λ − 1`. Accepts the full SES
/// range `(0, 2)`; weights above 1 map to windows below 1.
pub fn window_for_lambda(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 2.0) {
        return Err(Error::invalid(format!(
            "SES weight must lie in (0, 2), got {lambda}"
        )));
    }
    Ok(2.0 / lambda - 1.0)
}

/// `λ = 1 − θ`.
pub fn lambda_theta_map(theta: f64) -> Result<f64> {
    Arima011Params::new(theta)?;
    Ok(1.0 - theta)
}

/// `θ = 1 − λ`.
pub fn theta_lambda_map(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 2.0) {
        return Err(Error::invalid(format!(
            "SES weight must lie in (0, 2), got {lambda}"
        )));
    }
    Ok(1.0 - lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arima011Params {
    theta: f64,
}

impl Arima011Params {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > -1.0 && theta < 1.0) {
            return Err(Error::invalid(format!(
                "θ must lie in (-1, 1), got {theta}"
            )));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Optimal one-step forecast of ARIMA(0,1,1): `(1 − θ)·y + θ·ŷ`.
///
/// The innovation weight `1 − θ` is formed first and the carry-over weight
/// is its complement, matching [`ses_step`].
pub fn arima011_forecast_step(params: Arima011Params, y_new: f64, prev_forecast: f64) -> f64 {
    let innovation_weight = 1.0 - params.theta;
    innovation_weight * y_new + (1.0 - innovation_weight) * prev_forecast
}

/// Random walk plus noise: `y_t = μ_{t-1} + ε_t`, `μ_t = μ_{t-1} + η_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RwpnParams {
    var_eps: f64,
    var_eta: f64,
}

impl RwpnParams {
    pub fn new(var_eps: f64, var_eta: f64) -> Result<Self> {
        if !(var_eps > 0.0 && var_eps.is_finite() && var_eta > 0.0 && var_eta.is_finite()) {
            return Err(Error::invalid(format!(
                "RWPN variances must be positive, got σ²_ε = {var_eps}, σ²_η = {var_eta}"
            )));
        }
        Ok(Self { var_eps, var_eta })
    }

    pub fn var_eps(&self) -> f64 {
        self.var_eps
    }

    pub fn var_eta(&self) -> f64 {
        self.var_eta
    }

    /// `q = σ²_ε / σ²_η`.
    pub fn q(&self) -> f64 {
        self.var_eps / self.var_eta
    }

    /// MA coefficient of the equivalent ARIMA(0,1,1), obtained by matching
    /// the lag-one autocorrelation of the differenced series.
    ///
    /// [`theta_from_q`] solves `θ/(1 + θ²) = −1/(2 + r)`, which is the
    /// RWPN autocorrelation when `r = σ²_η / σ²_ε`, so that ratio is passed.
    pub fn equivalent_theta(&self) -> f64 {
        theta_from_ratio(self.var_eta / self.var_eps)
    }
}

/// Lag-one autocorrelation of the differenced RWPN series,
/// `−σ²_ε / (σ²_η + 2σ²_ε)`, always inside `(−0.5, 0)`.
pub fn rwpn_gamma1(params: RwpnParams) -> f64 {
    -params.var_eps / (params.var_eta + 2.0 * params.var_eps)
}

fn theta_from_ratio(q: f64) -> f64 {
    // (sqrt(q² + 4q) − 2 − q)/2, rewritten without the cancellation between
    // sqrt(q² + 4q) and q + 2 that loses all precision for large q.
    let root = (q * q + 4.0 * q).sqrt();
    -2.0 / (root + q + 2.0)
}

/// `θ = (√(q² + 4q) − 2 − q)/2`, confined to `(−1, 0)` and increasing in `q`.
///
/// The result satisfies `θ/(1 + θ²) = −1/(2 + q)`.
pub fn theta_from_q(q: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid(format!(
            "signal-to-noise ratio q must be > 0, got {q}"
        )));
    }
    Ok(theta_from_ratio(q))
}

/// Inverse of [`theta_from_q`] on `θ ∈ (−1, 0)`: `q = −(1 + θ)²/θ`.
pub fn q_from_theta(theta: f64) -> Result<f64> {
    if !(theta > -1.0 && theta < 0.0) {
        return Err(Error::invalid(format!(
            "θ = {theta} has no random-walk-plus-noise equivalent; it must lie in (-1, 0)"
        )));
    }
    Ok(-(1.0 + theta) * (1.0 + theta) / theta)
}

/// Composite map q → θ → λ → n. The window is real-valued; callers round it
/// when an integer window is needed.
pub fn window_for_q(q: f64) -> Result<f64> {
    let theta = theta_from_q(q)?;
    window_for_lambda(1.0 - theta)
}

/// The full parameter chain from any single entry point. Entries that fall
/// outside a model's admissible range are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelChain {
    pub q: Option<f64>,
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
    pub n: Option<f64>,
}

impl ModelChain {
    pub fn from_q(q: f64) -> Result<Self> {
        let theta = theta_from_q(q)?;
        Ok(Self::from_theta_unchecked(theta, Some(q)))
    }

    pub fn from_theta(theta: f64) -> Result<Self> {
        Arima011Params::new(theta)?;
        Ok(Self::from_theta_unchecked(theta, q_from_theta(theta).ok()))
    }

    pub fn from_lambda(lambda: f64) -> Result<Self> {
        let theta = theta_lambda_map(lambda)?;
        Ok(Self {
            q: q_from_theta(theta).ok(),
            theta: Arima011Params::new(theta).ok().map(|p| p.theta()),
            lambda: Some(lambda),
            n: window_for_lambda(lambda).ok(),
        })
    }

    pub fn from_window(n: f64) -> Result<Self> {
        let lambda = lambda_for_window(n)?;
        let mut chain = Self::from_lambda(lambda)?;
        chain.n = Some(n);
        Ok(chain)
    }

    fn from_theta_unchecked(theta: f64, q: Option<f64>) -> Self {
        let lambda = 1.0 - theta;
        Self {
            q,
            theta: Some(theta),
            lambda: Some(lambda),
            n: window_for_lambda(lambda).ok(),
        }
    }
}

/// SES smoothed level along `y`, seeded with `init`; entry `i` has absorbed
/// `y[0..=i]`.
pub fn ewma_series(y: &[f64], lambda: f64, init: f64) -> Result<Vec<f64>> {
    let mut state = SesState::with_forecast(lambda, init)?;
    Ok(y.iter()
        .map(|&v| {
            state = ses_forecast_step(state, v);
            state.forecast
        })
        .collect())
}
