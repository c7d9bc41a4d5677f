//! Rolling moving average, rolling standard deviation and Bollinger Bands,
//! plus the intercept-only rolling regression they coincide with.
//!
//! Values before index `n - 1` are undefined and stored as `None`.
//! Each window is evaluated with a two-pass scheme (mean first, then squared
//! deviations about it), so near-constant data never yields a negative
//! variance.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{format_date, LogRatioSeries};

/// Window size `n >= 2` and width multiplier `k > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandParams {
    n: usize,
    k: f64,
}

impl BandParams {
    pub fn new(n: usize, k: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "window size n must be >= 2, got {n}"
            )));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid(format!(
                "width multiplier k must be > 0, got {k}"
            )));
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Center line, rolling sigma and the two arms for one `(n, k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSet {
    pub params: BandParams,
    pub center: Vec<Option<f64>>,
    pub sigma: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
    pub valid_from: usize,
}

/// One defined bar of a [`BandSet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub center: f64,
    pub sigma: f64,
    pub upper: f64,
    pub lower: f64,
}

impl BandSet {
    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    /// Same center and sigma with the arms rebuilt for another multiplier.
    pub fn with_multiplier(&self, k: f64) -> Result<BandSet> {
        let params = BandParams::new(self.params.n(), k)?;
        let (upper, lower) = arms(&self.center, &self.sigma, k);
        Ok(BandSet {
            params,
            center: self.center.clone(),
            sigma: self.sigma.clone(),
            upper,
            lower,
            valid_from: self.valid_from,
        })
    }

    pub fn at(&self, i: usize) -> Option<BandPoint> {
        Some(BandPoint {
            center: (*self.center.get(i)?)?,
            sigma: self.sigma[i]?,
            upper: self.upper[i]?,
            lower: self.lower[i]?,
        })
    }
}

fn check_window(len: usize, n: usize, min_n: usize) -> Result<()> {
    if n < min_n {
        return Err(Error::invalid(format!(
            "window size n must be >= {min_n}, got {n}"
        )));
    }
    if len < n {
        return Err(Error::SeriesTooShort { len, n });
    }
    Ok(())
}

/// Sum-based mean refined by one pass over the residuals. A window of equal
/// values returns that value exactly.
fn window_mean(w: &[f64]) -> f64 {
    let len = w.len() as f64;
    let rough = w.iter().sum::<f64>() / len;
    rough + w.iter().map(|v| v - rough).sum::<f64>() / len
}

fn window_sd(w: &[f64], mean: f64) -> f64 {
    let ss: f64 = w.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (w.len() - 1) as f64).sqrt()
}

/// n-period moving average; `None` before index `n - 1`.
pub fn rolling_mean(y: &[f64], n: usize) -> Result<Vec<Option<f64>>> {
    check_window(y.len(), n, 1)?;
    let mut out = vec![None; n - 1];
    out.extend(y.windows(n).map(|w| Some(window_mean(w))));
    Ok(out)
}

/// Rolling sample standard deviation with the unbiased `n - 1` denominator.
pub fn rolling_std(y: &[f64], n: usize) -> Result<Vec<Option<f64>>> {
    check_window(y.len(), n, 2)?;
    let mut out = vec![None; n - 1];
    out.extend(y.windows(n).map(|w| Some(window_sd(w, window_mean(w)))));
    Ok(out)
}

type Arm = Vec<Option<f64>>;

fn arms(center: &[Option<f64>], sigma: &[Option<f64>], k: f64) -> (Arm, Arm) {
    let arm = |sign: f64| -> Arm {
        center
            .iter()
            .zip(sigma)
            .map(|(c, s)| Some(c.as_ref()? + sign * k * s.as_ref()?))
            .collect()
    };
    (arm(1.0), arm(-1.0))
}

pub fn bollinger_bands(y: &[f64], params: BandParams) -> Result<BandSet> {
    let (n, k) = (params.n(), params.k());
    let center = rolling_mean(y, n)?;
    let sigma = rolling_std(y, n)?;
    let (upper, lower) = arms(&center, &sigma, k);
    Ok(BandSet {
        params,
        center,
        sigma,
        upper,
        lower,
        valid_from: n - 1,
    })
}

/// Per-window least-squares estimates of the intercept-only model
/// `y_t = beta + e_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingFit {
    pub beta_hat: Vec<Option<f64>>,
    pub sigma_hat: Vec<Option<f64>>,
}

/// Ordinary least squares via the normal equations `X'X b = X'y`, solved by
/// Gaussian elimination. Returns the coefficients and the residual variance
/// `e'e / (rows - cols)`.
#[allow(clippy::needless_range_loop)]
fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let p = columns.len();
    let rows = y.len();
    let mut gram = vec![vec![0.0; p + 1]; p];
    for a in 0..p {
        for b in 0..p {
            gram[a][b] = columns[a].iter().zip(&columns[b]).map(|(u, v)| u * v).sum();
        }
        gram[a][p] = columns[a].iter().zip(y).map(|(u, v)| u * v).sum();
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| gram[i][col].abs().total_cmp(&gram[j][col].abs()))
            .unwrap_or(col);
        gram.swap(col, pivot);
        for r in col + 1..p {
            let f = gram[r][col] / gram[col][col];
            for c in col..=p {
                gram[r][c] -= f * gram[col][c];
            }
        }
    }
    let mut beta = vec![0.0; p];
    for r in (0..p).rev() {
        let tail: f64 = (r + 1..p).map(|c| gram[r][c] * beta[c]).sum();
        beta[r] = (gram[r][p] - tail) / gram[r][r];
    }
    let rss: f64 = (0..rows)
        .map(|t| {
            let fitted: f64 = (0..p).map(|c| columns[c][t] * beta[c]).sum();
            let e = y[t] - fitted;
            e * e
        })
        .sum();
    (beta, rss / (rows - p) as f64)
}

/// Rolling intercept-only regression, fitted window by window through
/// [`least_squares`] on a column of ones.
pub fn rolling_intercept_fit(y: &[f64], n: usize) -> Result<RollingFit> {
    check_window(y.len(), n, 2)?;
    let ones = vec![vec![1.0; n]];
    let mut beta_hat = vec![None; n - 1];
    let mut sigma_hat = vec![None; n - 1];
    for w in y.windows(n) {
        let (beta, resid_var) = least_squares(&ones, w);
        beta_hat.push(Some(beta[0]));
        sigma_hat.push(Some(resid_var.sqrt()));
    }
    Ok(RollingFit {
        beta_hat,
        sigma_hat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntervalMode {
    /// `beta ± m * sigma * sqrt(1 + 1/n)`
    Exact,
    /// `beta ± m * sigma`, the Bollinger arms when `m = k`.
    Approximate,
}

/// Interval for the next observation of the intercept-only model. The
/// multiplier stands in for the Student-t quantile.
pub fn prediction_interval(
    beta_hat: f64,
    sigma_hat: f64,
    n: usize,
    multiplier: f64,
    mode: IntervalMode,
) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "window size n must be >= 2, got {n}"
        )));
    }
    if sigma_hat.is_nan() || sigma_hat < 0.0 {
        return Err(Error::invalid(format!(
            "sigma_hat must be >= 0, got {sigma_hat}"
        )));
    }
    let half = match mode {
        IntervalMode::Exact => multiplier * sigma_hat * exact_width_factor(n),
        IntervalMode::Approximate => multiplier * sigma_hat,
    };
    Ok((beta_hat - half, beta_hat + half))
}

/// Ratio of exact to approximate interval width, `sqrt(1 + 1/n)`.
pub fn exact_width_factor(n: usize) -> f64 {
    (1.0 + 1.0 / n as f64).sqrt()
}

const BAND_HEADER: &str = "date,y,center,sigma,upper,lower";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `date,y,center,sigma,upper,lower`; the undefined region has empty
/// fields.
pub fn write_band_csv<W: Write>(
    series: &LogRatioSeries,
    bands: &BandSet,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{BAND_HEADER}")?;
    for (i, (date, y)) in series.dates().iter().zip(series.values()).enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            format_date(*date),
            y,
            opt(bands.center[i]),
            opt(bands.sigma[i]),
            opt(bands.upper[i]),
            opt(bands.lower[i]),
        )?;
    }
    Ok(())
}

/// One parsed row of a band CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub date: String,
    pub y: f64,
    pub center: Option<f64>,
    pub sigma: Option<f64>,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
}

pub fn read_band_csv<R: BufRead>(input: R) -> Result<Vec<BandRow>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::MalformedRow {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if i == 0 {
            if line.trim() != BAND_HEADER {
                return Err(Error::MalformedRow {
                    line: 1,
                    reason: format!("expected header `{BAND_HEADER}`"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |reason: String| Error::MalformedRow {
            line: i + 1,
            reason,
        };
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", fields.len())));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| bad(format!("bad number `{s}`")))
            }
        };
        rows.push(BandRow {
            date: fields[0].to_string(),
            y: num(fields[1])?.ok_or_else(|| bad("missing y".into()))?,
            center: num(fields[2])?,
            sigma: num(fields[3])?,
            upper: num(fields[4])?,
            lower: num(fields[5])?,
        });
    }
    Ok(rows)
}
