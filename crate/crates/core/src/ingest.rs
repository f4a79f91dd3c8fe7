//! Price and risk-free-rate loading, date alignment and calendar-month windows.
//!
//! Price files carry the header `entity,date,close`, rate files `date,rate`.
//! Dates are ISO-8601 calendar days. Rates are per-observation decimals
//! (0.0001 = 1 bp per day) and may be negative; no periodicity conversion
//! is applied.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest month size accepted by default before a month is skipped.
pub const DEFAULT_MIN_OBS: usize = 10;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("missing column `{0}` in header")]
    MissingColumn(&'static str),
    #[error("line {line}: duplicate date {date} for `{entity}`")]
    DuplicateDate {
        entity: String,
        date: NaiveDate,
        line: u64,
    },
    #[error("line {line}: close must be positive, got {close}")]
    NonPositiveClose { line: u64, close: f64 },
    #[error("line {line}: rate must be finite, got {rate}")]
    NonFiniteRate { line: u64, rate: f64 },
    #[error("`{entity}` has {len} observation(s), at least 2 are required")]
    TooShort { entity: String, len: usize },
    #[error("rate series is empty")]
    EmptyRates,
    #[error("no risk-free rate available on or before {date}")]
    NoRateBefore { date: NaiveDate },
    #[error("min_obs must be at least 2, got {0}")]
    InvalidMinObs(usize),
}

/// Calendar month, ordered chronologically and printed as `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthKey {
    pub year: i32,
    pub month: u32,
}

impl MonthKey {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            Self {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Self {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: MonthKey) -> i64 {
        (other.year as i64 - self.year as i64) * 12 + other.month as i64 - self.month as i64
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| format!("expected YYYY-MM, got `{s}`"))?;
        let year = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let month = m.parse().map_err(|_| format!("bad month in `{s}`"))?;
        MonthKey::new(year, month).ok_or_else(|| format!("month out of range in `{s}`"))
    }
}

impl Serialize for MonthKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub close: f64,
}

/// Dated closing prices for one entity. Dates strictly increase, closes are
/// positive and there are at least two observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    entity_id: String,
    observations: Vec<PricePoint>,
}

impl PriceSeries {
    /// Builds a series from observations in any order.
    pub fn new(
        entity_id: impl Into<String>,
        mut observations: Vec<PricePoint>,
    ) -> Result<Self, IngestError> {
        let entity_id = entity_id.into();
        for p in &observations {
            if !(p.close > 0.0) || !p.close.is_finite() {
                return Err(IngestError::NonPositiveClose {
                    line: 0,
                    close: p.close,
                });
            }
        }
        observations.sort_by_key(|p| p.date);
        if let Some(w) = observations.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(IngestError::DuplicateDate {
                entity: entity_id,
                date: w[0].date,
                line: 0,
            });
        }
        if observations.len() < 2 {
            return Err(IngestError::TooShort {
                entity: entity_id,
                len: observations.len(),
            });
        }
        Ok(Self {
            entity_id,
            observations,
        })
    }

    pub fn entity_id(&self) -> &str {
        &self.entity_id
    }

    pub fn observations(&self) -> &[PricePoint] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub date: NaiveDate,
    pub rate: f64,
}

/// Risk-free rate fixings, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskFreeSeries {
    observations: Vec<RatePoint>,
}

impl RiskFreeSeries {
    pub fn new(mut observations: Vec<RatePoint>) -> Result<Self, IngestError> {
        if let Some(p) = observations.iter().find(|p| !p.rate.is_finite()) {
            return Err(IngestError::NonFiniteRate {
                line: 0,
                rate: p.rate,
            });
        }
        observations.sort_by_key(|p| p.date);
        if let Some(w) = observations.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(IngestError::DuplicateDate {
                entity: "<rates>".into(),
                date: w[0].date,
                line: 0,
            });
        }
        if observations.is_empty() {
            return Err(IngestError::EmptyRates);
        }
        Ok(Self { observations })
    }

    /// A constant rate fixed on `date` and carried forward from there.
    pub fn constant(date: NaiveDate, rate: f64) -> Result<Self, IngestError> {
        Self::new(vec![RatePoint { date, rate }])
    }

    pub fn observations(&self) -> &[RatePoint] {
        &self.observations
    }

    /// Most recent fixing on or before `date`.
    pub fn rate_on(&self, date: NaiveDate) -> Option<f64> {
        let idx = self.observations.partition_point(|p| p.date <= date);
        idx.checked_sub(1).map(|i| self.observations[i].rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedObservation {
    pub date: NaiveDate,
    pub close: f64,
    pub rate: f64,
}

/// Prices paired with the rate in force on each price date.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSeries {
    entity_id: String,
    rows: Vec<AlignedObservation>,
}

impl AlignedSeries {
    pub fn entity_id(&self) -> &str {
        &self.entity_id
    }

    pub fn rows(&self) -> &[AlignedObservation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Anything with an ordered run of dates that can be cut into months.
pub trait DatedSeries {
    fn entity_id(&self) -> &str;
    fn date_at(&self, index: usize) -> NaiveDate;
    fn date_count(&self) -> usize;
}

impl DatedSeries for AlignedSeries {
    fn entity_id(&self) -> &str {
        &self.entity_id
    }

    fn date_at(&self, index: usize) -> NaiveDate {
        self.rows[index].date
    }

    fn date_count(&self) -> usize {
        self.rows.len()
    }
}

/// Pairs every price date with the latest rate fixed on or before it.
pub fn align(prices: &PriceSeries, rates: &RiskFreeSeries) -> Result<AlignedSeries, IngestError> {
    let rows = prices
        .observations()
        .iter()
        .map(|p| {
            let rate = rates
                .rate_on(p.date)
                .ok_or(IngestError::NoRateBefore { date: p.date })?;
            Ok(AlignedObservation {
                date: p.date,
                close: p.close,
                rate,
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    Ok(AlignedSeries {
        entity_id: prices.entity_id().to_owned(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonthWindow {
    pub entity_id: String,
    pub month: MonthKey,
    pub span: Range<usize>,
    pub obs_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedMonth {
    pub entity_id: String,
    pub month: MonthKey,
    pub span: Range<usize>,
    pub obs_count: usize,
    pub min_obs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MonthPartition {
    pub windows: Vec<MonthWindow>,
    pub skipped: Vec<SkippedMonth>,
}

impl MonthPartition {
    /// Every month in chronological order, tagged with whether it was kept.
    pub fn months(&self) -> Vec<(MonthKey, Range<usize>, bool)> {
        let mut all: Vec<_> = self
            .windows
            .iter()
            .map(|w| (w.month, w.span.clone(), true))
            .chain(
                self.skipped
                    .iter()
                    .map(|s| (s.month, s.span.clone(), false)),
            )
            .collect();
        all.sort_by_key(|(m, _, _)| *m);
        all
    }
}

/// Splits a dated series into calendar-month windows. Months with fewer than
/// `min_obs` observations are reported in `skipped`.
pub fn partition_months<S: DatedSeries + ?Sized>(
    series: &S,
    min_obs: usize,
) -> Result<MonthPartition, IngestError> {
    if min_obs < 2 {
        return Err(IngestError::InvalidMinObs(min_obs));
    }
    let mut out = MonthPartition::default();
    let n = series.date_count();
    let mut start = 0;
    while start < n {
        let month = MonthKey::of(series.date_at(start));
        let mut end = start + 1;
        while end < n && MonthKey::of(series.date_at(end)) == month {
            end += 1;
        }
        let obs_count = end - start;
        if obs_count >= min_obs {
            out.windows.push(MonthWindow {
                entity_id: series.entity_id().to_owned(),
                month,
                span: start..end,
                obs_count,
            });
        } else {
            out.skipped.push(SkippedMonth {
                entity_id: series.entity_id().to_owned(),
                month,
                span: start..end,
                obs_count,
                min_obs,
            });
        }
        start = end;
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or(IngestError::MissingColumn(name))
}

fn csv_error(err: csv::Error) -> IngestError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    IngestError::Malformed {
        line,
        message: err.to_string(),
    }
}

fn parse_date(raw: &str, line: u64) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|e| IngestError::Malformed {
        line,
        message: format!("bad date `{raw}`: {e}"),
    })
}

fn parse_number(raw: &str, what: &str, line: u64) -> Result<f64, IngestError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| IngestError::Malformed {
            line,
            message: format!("bad {what} `{raw}`"),
        })
}

/// Reads every entity in a price CSV. Entities come back sorted by id.
pub fn read_price_panel<R: Read>(reader: R) -> Result<Vec<PriceSeries>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let (ei, di, ci) = (
        column(&headers, "entity")?,
        column(&headers, "date")?,
        column(&headers, "close")?,
    );
    let mut by_entity: BTreeMap<String, Vec<(PricePoint, u64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| {
            record.get(i).ok_or_else(|| IngestError::Malformed {
                line,
                message: "too few fields".into(),
            })
        };
        let entity = field(ei)?.to_owned();
        let date = parse_date(field(di)?, line)?;
        let close = parse_number(field(ci)?, "close", line)?;
        if !(close > 0.0) || !close.is_finite() {
            return Err(IngestError::NonPositiveClose { line, close });
        }
        by_entity
            .entry(entity)
            .or_default()
            .push((PricePoint { date, close }, line));
    }
    by_entity
        .into_iter()
        .map(|(entity, mut rows)| {
            rows.sort_by_key(|(p, _)| p.date);
            if let Some(w) = rows.windows(2).find(|w| w[0].0.date == w[1].0.date) {
                return Err(IngestError::DuplicateDate {
                    entity,
                    date: w[1].0.date,
                    line: w[0].1.max(w[1].1),
                });
            }
            PriceSeries::new(entity, rows.into_iter().map(|(p, _)| p).collect())
        })
        .collect()
}

/// Loads all entities from a price CSV file.
pub fn load_price_panel(path: &Path) -> Result<Vec<PriceSeries>, IngestError> {
    read_price_panel(open(path)?)
}

/// Loads one entity from a price CSV file; rows of other entities are ignored.
pub fn load_prices(path: &Path, entity_id: &str) -> Result<PriceSeries, IngestError> {
    load_price_panel(path)?
        .into_iter()
        .find(|s| s.entity_id() == entity_id)
        .ok_or_else(|| IngestError::TooShort {
            entity: entity_id.to_owned(),
            len: 0,
        })
}

pub fn read_rates<R: Read>(reader: R) -> Result<RiskFreeSeries, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let (di, ri) = (column(&headers, "date")?, column(&headers, "rate")?);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| {
            record.get(i).ok_or_else(|| IngestError::Malformed {
                line,
                message: "too few fields".into(),
            })
        };
        let date = parse_date(field(di)?, line)?;
        let rate = parse_number(field(ri)?, "rate", line)?;
        if !rate.is_finite() {
            return Err(IngestError::NonFiniteRate { line, rate });
        }
        rows.push((RatePoint { date, rate }, line));
    }
    rows.sort_by_key(|(p, _)| p.date);
    if let Some(w) = rows.windows(2).find(|w| w[0].0.date == w[1].0.date) {
        return Err(IngestError::DuplicateDate {
            entity: "<rates>".into(),
            date: w[1].0.date,
            line: w[0].1.max(w[1].1),
        });
    }
    RiskFreeSeries::new(rows.into_iter().map(|(p, _)| p).collect())
}

pub fn load_rates(path: &Path) -> Result<RiskFreeSeries, IngestError> {
    read_rates(open(path)?)
}

/// Writes price series in the `entity,date,close` layout. Closes use the
/// shortest representation that parses back to the same `f64`.
pub fn write_prices<'a, W, I>(writer: W, series: I) -> csv::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a PriceSeries>,
{
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["entity", "date", "close"])?;
    for s in series {
        for p in s.observations() {
            w.write_record([
                s.entity_id(),
                &p.date.format("%Y-%m-%d").to_string(),
                &p.close.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_rates<W: Write>(writer: W, rates: &RiskFreeSeries) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "rate"])?;
    for p in rates.observations() {
        w.write_record([p.date.format("%Y-%m-%d").to_string(), p.rate.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
