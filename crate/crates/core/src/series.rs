//! Price ingestion and the log-price-ratio series.
//!
//! Every downstream computation runs on a [`LogRatioSeries`]: the values
//! `ln(P_z / P_x)` over the dates both assets share. Time indices are
//! 0-based and dense over those aligned dates.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Dated, strictly positive prices for a single asset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSeries {
    asset_id: String,
    observations: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    /// Builds a series, sorting by date. Rejects non-positive (or non-finite)
    /// prices and duplicate dates.
    pub fn new(
        asset_id: impl Into<String>,
        mut observations: Vec<(NaiveDate, f64)>,
    ) -> Result<Self> {
        for (i, &(_, price)) in observations.iter().enumerate() {
            if !(price.is_finite() && price > 0.0) {
                return Err(Error::NonPositivePrice { line: i + 1, price });
            }
        }
        observations.sort_by_key(|&(d, _)| d);
        if let Some(w) = observations.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateDate { date: w[0].0 });
        }
        Ok(Self {
            asset_id: asset_id.into(),
            observations,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Writes `date,price` rows with a header. Prices use the shortest
    /// representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "date,price")?;
        for (date, price) in &self.observations {
            writeln!(out, "{},{}", date.format(DATE_FORMAT), price)?;
        }
        Ok(())
    }
}

/// Reads a `date,price` file. See [`parse_price_reader`].
pub fn parse_price_csv(path: impl AsRef<Path>, asset_id: &str) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_price_reader(file, asset_id)
}

/// Parses `date,price` rows with ISO-8601 dates. A single leading header row
/// is detected by a non-numeric second field. Unsorted input is sorted.
pub fn parse_price_reader<R: Read>(reader: R, asset_id: &str) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut observations = Vec::new();
    let mut seen: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(row + 1);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 2 fields `date,price`, found {}", record.len()),
            });
        }
        let price_field = &record[1];
        let price: f64 = match price_field.parse() {
            Ok(p) => p,
            Err(_) if row == 0 => continue, // header
            Err(_) => {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("unparseable price `{price_field}`"),
                })
            }
        };
        let date = NaiveDate::parse_from_str(&record[0], DATE_FORMAT).map_err(|e| {
            Error::MalformedRow {
                line,
                reason: format!("bad date `{}`: {e}", &record[0]),
            }
        })?;
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::NonPositivePrice { line, price });
        }
        if seen.insert(date, line).is_some() {
            return Err(Error::DuplicateDate { date });
        }
        observations.push((date, price));
    }
    PriceSeries::new(asset_id, observations)
}

/// `y_t = ln(P_z / P_x)` over the dates common to both assets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRatioSeries {
    numerator_id: String,
    denominator_id: String,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl LogRatioSeries {
    /// Wraps precomputed values. Dates must be strictly increasing and match
    /// `values` in length.
    pub fn from_parts(
        numerator_id: impl Into<String>,
        denominator_id: impl Into<String>,
        dates: Vec<NaiveDate>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        Ok(Self {
            numerator_id: numerator_id.into(),
            denominator_id: denominator_id.into(),
            dates,
            values,
        })
    }

    /// Synthetic series on consecutive calendar days starting at `start`.
    pub fn synthetic(start: NaiveDate, values: Vec<f64>) -> Self {
        let dates = start.iter_days().take(values.len()).collect();
        Self {
            numerator_id: "z".into(),
            denominator_id: "x".into(),
            dates,
            values,
        }
    }

    pub fn numerator_id(&self) -> &str {
        &self.numerator_id
    }

    pub fn denominator_id(&self) -> &str {
        &self.denominator_id
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the first date `>= date`.
    pub fn index_at_or_after(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d < date)
    }

    /// Index one past the last date `<= date`.
    pub fn index_after(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d <= date)
    }
}

/// Aligns two price series on their common dates (strict intersection, no
/// filling) and takes the log ratio `ln(z) - ln(x)` on each.
pub fn align_pair(z: &PriceSeries, x: &PriceSeries) -> Result<LogRatioSeries> {
    if z.is_empty() || x.is_empty() {
        return Err(Error::EmptySeries);
    }
    let (mut i, mut j) = (0, 0);
    let (zs, xs) = (z.observations(), x.observations());
    let mut dates = Vec::new();
    let mut values = Vec::new();
    while i < zs.len() && j < xs.len() {
        match zs[i].0.cmp(&xs[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dates.push(zs[i].0);
                values.push(zs[i].1.ln() - xs[j].1.ln());
                i += 1;
                j += 1;
            }
        }
    }
    if dates.is_empty() {
        return Err(Error::EmptyIntersection {
            left: z.asset_id().to_string(),
            right: x.asset_id().to_string(),
        });
    }
    Ok(LogRatioSeries {
        numerator_id: z.asset_id().to_string(),
        denominator_id: x.asset_id().to_string(),
        dates,
        values,
    })
}

pub(crate) fn format_date(date: NaiveDate) -> String {
    date.format(DATE_FORMAT).to_string()
}

pub(crate) fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|e| Error::invalid(format!("bad date `{s}`: {e}")))
}
