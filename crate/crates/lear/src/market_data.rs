//! Hourly market dataset: parsing, calendar alignment, missing-day
//! imputation and validation.
//!
//! The canonical store is a dense 24-slot-per-day local-time grid per
//! series. Missing whole days are filled hour-by-hour with the mean of
//! the nearest fully-present day on each side. DST transition days are
//! normalized onto the 24-slot grid: the spring-forward day's skipped
//! hour is interpolated from its same-day neighbors, the fall-back
//! day's repeated hour is averaged into one slot.

use std::fmt;
use std::io::{Read, Write};

use chrono::{Datelike, Days, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const HOURS_PER_DAY: usize = 24;

/// The closed set of input series: the Belgian spot price plus five
/// exogenous day-ahead forecasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SeriesId {
    PriceBE,
    GenForecastFR,
    LoadForecastFR,
    WindForecastBE,
    SolarForecastBE,
    LoadForecastBE,
}

impl SeriesId {
    pub const ALL: [SeriesId; 6] = [
        SeriesId::PriceBE,
        SeriesId::GenForecastFR,
        SeriesId::LoadForecastFR,
        SeriesId::WindForecastBE,
        SeriesId::SolarForecastBE,
        SeriesId::LoadForecastBE,
    ];

    /// The five exogenous series, in canonical order.
    pub const EXOGENOUS: [SeriesId; 5] = [
        SeriesId::GenForecastFR,
        SeriesId::LoadForecastFR,
        SeriesId::WindForecastBE,
        SeriesId::SolarForecastBE,
        SeriesId::LoadForecastBE,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SeriesId::PriceBE => "PriceBE",
            SeriesId::GenForecastFR => "GenForecastFR",
            SeriesId::LoadForecastFR => "LoadForecastFR",
            SeriesId::WindForecastBE => "WindForecastBE",
            SeriesId::SolarForecastBE => "SolarForecastBE",
            SeriesId::LoadForecastBE => "LoadForecastBE",
        }
    }

    pub fn parse(s: &str) -> Option<SeriesId> {
        SeriesId::ALL.iter().copied().find(|id| id.name() == s)
    }

    pub fn index(self) -> usize {
        SeriesId::ALL.iter().position(|&id| id == self).unwrap()
    }
}

impl fmt::Display for SeriesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One parsed observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourlyRecord {
    pub date: NaiveDate,
    pub hour: u8,
    pub series: SeriesId,
    pub value: f64,
}

/// Column layout of the input CSV.
#[derive(Debug, Clone)]
pub enum CsvSchema {
    /// `timestamp,series,value` rows, one observation each.
    Long,
    /// `timestamp` plus one value column per series. Empty cells mean
    /// the observation is absent.
    Wide(Vec<(String, SeriesId)>),
}

impl CsvSchema {
    /// Wide layout whose column headers are the series names themselves.
    pub fn wide_default() -> CsvSchema {
        CsvSchema::Wide(
            SeriesId::ALL
                .iter()
                .map(|&s| (s.name().to_string(), s))
                .collect(),
        )
    }
}

/// Pre-imputation layer: a dense calendar grid that may contain NaN
/// cells where observations are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    first_day: NaiveDate,
    n_days: usize,
    /// Indexed `[series.index()][day_idx * 24 + hour]`.
    values: Vec<Vec<f64>>,
}

/// Result of a parse: the raw grid plus any lenient-mode warnings.
#[derive(Debug)]
pub struct ParseOutcome {
    pub dataset: RawDataset,
    pub warnings: Vec<String>,
}

/// Calendar-complete dataset: every cell finite, every day 24 slots.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDataset {
    first_day: NaiveDate,
    n_days: usize,
    values: Vec<Vec<f64>>,
    imputation_log: Vec<(NaiveDate, SeriesId)>,
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Calendar days with no data in any series.
    pub contiguity_gaps: Vec<NaiveDate>,
    /// Non-finite cells on days that are not full calendar gaps.
    pub non_finite: Vec<(NaiveDate, u8, SeriesId)>,
    /// Fraction of finite cells per series.
    pub coverage: Vec<(SeriesId, f64)>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.contiguity_gaps.is_empty() && self.non_finite.is_empty()
    }
}

fn last_sunday(year: i32, month: u32) -> NaiveDate {
    let last = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap()
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1).unwrap()
    }
    .pred_opt()
    .unwrap();
    let back = last.weekday().num_days_from_sunday() as u64;
    last - Days::new(back)
}

/// Local hour skipped on the spring-forward day and repeated on the
/// fall-back day (CET/CEST convention).
const DST_HOUR: u8 = 2;

fn is_spring_forward_day(date: NaiveDate) -> bool {
    date == last_sunday(date.year(), 3)
}

fn is_fall_back_slot(date: NaiveDate, hour: u8) -> bool {
    hour == DST_HOUR && date == last_sunday(date.year(), 10)
}

struct ParsedRow {
    line: u64,
    date: NaiveDate,
    hour: u8,
    series: SeriesId,
    value: f64,
}

fn parse_timestamp(raw: &str, line: u64) -> Result<(NaiveDate, u8)> {
    let dt = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M").map_err(|e| {
        Error::MalformedRow {
            line,
            reason: format!("bad timestamp '{raw}': {e}"),
        }
    })?;
    if dt.minute() != 0 {
        return Err(Error::MalformedRow {
            line,
            reason: format!("timestamp '{raw}' is not on the hour"),
        });
    }
    Ok((dt.date(), dt.hour() as u8))
}

fn parse_value(raw: &str, line: u64) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("bad value '{raw}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedRow {
            line,
            reason: format!("non-finite value '{raw}'"),
        });
    }
    Ok(v)
}

/// Parses an hourly-market CSV into the raw (gappy) grid.
///
/// In strict mode any rejected row aborts the load; with `lenient` the
/// offending row is skipped and reported in the warnings list.
/// Duplicate (timestamp, series) pairs are an error everywhere except
/// the DST fall-back slot, where the two observations for the repeated
/// local hour are averaged into the single grid slot.
pub fn parse_csv<R: Read>(source: R, schema: &CsvSchema, lenient: bool) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader.headers()?.clone();

    let find_col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MalformedRow {
                line: 1,
                reason: format!("missing column '{name}'"),
            })
    };

    enum Cols {
        Long {
            ts: usize,
            series: usize,
            value: usize,
        },
        Wide {
            ts: usize,
            series_cols: Vec<(usize, SeriesId)>,
        },
    }

    let cols = match schema {
        CsvSchema::Long => Cols::Long {
            ts: find_col("timestamp")?,
            series: find_col("series")?,
            value: find_col("value")?,
        },
        CsvSchema::Wide(mapping) => {
            let mut series_cols = Vec::with_capacity(mapping.len());
            for (name, id) in mapping {
                series_cols.push((find_col(name)?, *id));
            }
            Cols::Wide {
                ts: find_col("timestamp")?,
                series_cols,
            }
        }
    };

    let mut rows: Vec<ParsedRow> = Vec::new();
    let mut warnings = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(rows.len() as u64 + 2);
        let parsed: Result<Vec<ParsedRow>> = (|| {
            let mut out = Vec::new();
            match &cols {
                Cols::Long { ts, series, value } => {
                    let (date, hour) = parse_timestamp(&record[*ts], line)?;
                    let series = SeriesId::parse(record[*series].trim())
                        .ok_or_else(|| Error::UnknownSeries(record[*series].to_string()))?;
                    let value = parse_value(&record[*value], line)?;
                    out.push(ParsedRow {
                        line,
                        date,
                        hour,
                        series,
                        value,
                    });
                }
                Cols::Wide { ts, series_cols } => {
                    let (date, hour) = parse_timestamp(&record[*ts], line)?;
                    for (col, series) in series_cols {
                        let raw = record[*col].trim();
                        if raw.is_empty() {
                            continue;
                        }
                        out.push(ParsedRow {
                            line,
                            date,
                            hour,
                            series: *series,
                            value: parse_value(raw, line)?,
                        });
                    }
                }
            }
            Ok(out)
        })();
        match parsed {
            Ok(mut r) => rows.append(&mut r),
            Err(e) if lenient => warnings.push(format!("skipped: {e}")),
            Err(e) => return Err(e),
        }
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    let first_day = rows.iter().map(|r| r.date).min().unwrap();
    let last_day = rows.iter().map(|r| r.date).max().unwrap();
    let n_days = (last_day - first_day).num_days() as usize + 1;

    let mut values = vec![vec![f64::NAN; n_days * HOURS_PER_DAY]; SeriesId::ALL.len()];
    let mut counts = vec![vec![0u8; n_days * HOURS_PER_DAY]; SeriesId::ALL.len()];

    for row in &rows {
        let day_idx = (row.date - first_day).num_days() as usize;
        let slot = day_idx * HOURS_PER_DAY + row.hour as usize;
        let s = row.series.index();
        match counts[s][slot] {
            0 => {
                values[s][slot] = row.value;
                counts[s][slot] = 1;
            }
            1 if is_fall_back_slot(row.date, row.hour) => {
                values[s][slot] += row.value;
                counts[s][slot] = 2;
            }
            _ => {
                let err = Error::DuplicateTimestamp {
                    date: row.date,
                    hour: row.hour,
                    series: row.series,
                };
                if lenient {
                    warnings.push(format!("skipped line {}: {err}", row.line));
                } else {
                    return Err(err);
                }
            }
        }
    }

    // Average the fall-back slot's two observations.
    for s in 0..values.len() {
        for slot in 0..values[s].len() {
            if counts[s][slot] == 2 {
                values[s][slot] /= 2.0;
            }
        }
    }

    Ok(ParseOutcome {
        dataset: RawDataset {
            first_day,
            n_days,
            values,
        },
        warnings,
    })
}

impl RawDataset {
    pub fn from_values(first_day: NaiveDate, values: Vec<Vec<f64>>) -> RawDataset {
        assert_eq!(values.len(), SeriesId::ALL.len());
        let n = values[0].len();
        assert!(n % HOURS_PER_DAY == 0 && values.iter().all(|v| v.len() == n));
        RawDataset {
            first_day,
            n_days: n / HOURS_PER_DAY,
            values,
        }
    }

    pub fn first_day(&self) -> NaiveDate {
        self.first_day
    }

    pub fn last_day(&self) -> NaiveDate {
        self.first_day + Days::new(self.n_days as u64 - 1)
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn cell(&self, series: SeriesId, day_idx: usize, hour: u8) -> f64 {
        self.values[series.index()][day_idx * HOURS_PER_DAY + hour as usize]
    }

    fn date_of(&self, day_idx: usize) -> NaiveDate {
        self.first_day + Days::new(day_idx as u64)
    }

    /// All finite cells in (date, hour, series) order.
    pub fn records(&self) -> Vec<HourlyRecord> {
        let mut out = Vec::new();
        for day_idx in 0..self.n_days {
            let date = self.date_of(day_idx);
            for hour in 0..HOURS_PER_DAY as u8 {
                for series in SeriesId::ALL {
                    let v = self.cell(series, day_idx, hour);
                    if v.is_finite() {
                        out.push(HourlyRecord {
                            date,
                            hour,
                            series,
                            value: v,
                        });
                    }
                }
            }
        }
        out
    }

    /// Long-format canonical CSV of all finite cells.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "timestamp,series,value")?;
        for r in self.records() {
            writeln!(w, "{}T{:02}:00,{},{}", r.date, r.hour, r.series, r.value)?;
        }
        Ok(())
    }
}

/// Fills every missing cell and returns the calendar-complete dataset.
///
/// A day is fully present for a series when all 24 slots are finite.
/// Missing cells are filled hour-by-hour with the mean of the nearest
/// fully-present day before and after (the neighbor sets are decided on
/// the raw layer, so consecutive missing days share the same pair).
/// On the spring-forward DST day, a lone missing transition hour is
/// first interpolated from its two same-day neighbor hours.
pub fn impute_missing_days(raw: &RawDataset) -> Result<MarketDataset> {
    let n_days = raw.n_days;
    let mut values = raw.values.clone();
    let mut log: Vec<(NaiveDate, SeriesId)> = Vec::new();

    for series in SeriesId::ALL {
        let s = series.index();
        if values[s].iter().all(|v| !v.is_finite()) {
            return Err(Error::EmptySeries(series));
        }

        let mut filled_days = vec![false; n_days];

        // Spring-forward transition hour: same-day neighbor interpolation.
        for day_idx in 0..n_days {
            let date = raw.date_of(day_idx);
            if !is_spring_forward_day(date) {
                continue;
            }
            let base = day_idx * HOURS_PER_DAY;
            let h = DST_HOUR as usize;
            if !values[s][base + h].is_finite()
                && values[s][base + h - 1].is_finite()
                && values[s][base + h + 1].is_finite()
            {
                values[s][base + h] = (values[s][base + h - 1] + values[s][base + h + 1]) / 2.0;
                filled_days[day_idx] = true;
            }
        }

        let fully_present: Vec<bool> = (0..n_days)
            .map(|d| {
                let base = d * HOURS_PER_DAY;
                (0..HOURS_PER_DAY).all(|h| values[s][base + h].is_finite())
            })
            .collect();

        // Nearest fully-present day strictly before/after each day.
        let mut prev_full = vec![None; n_days];
        let mut latest = None;
        for d in 0..n_days {
            prev_full[d] = latest;
            if fully_present[d] {
                latest = Some(d);
            }
        }
        let mut next_full = vec![None; n_days];
        let mut earliest = None;
        for d in (0..n_days).rev() {
            next_full[d] = earliest;
            if fully_present[d] {
                earliest = Some(d);
            }
        }

        for d in 0..n_days {
            if fully_present[d] {
                continue;
            }
            let date = raw.date_of(d);
            for h in 0..HOURS_PER_DAY {
                let slot = d * HOURS_PER_DAY + h;
                if values[s][slot].is_finite() {
                    continue;
                }
                let before = prev_full[d].ok_or(Error::BoundaryGap {
                    date,
                    series,
                    side: "before",
                })?;
                let after = next_full[d].ok_or(Error::BoundaryGap {
                    date,
                    series,
                    side: "after",
                })?;
                let a = values[s][before * HOURS_PER_DAY + h];
                let b = values[s][after * HOURS_PER_DAY + h];
                values[s][slot] = (a + b) / 2.0;
                filled_days[d] = true;
            }
        }

        for d in 0..n_days {
            if filled_days[d] {
                log.push((raw.date_of(d), series));
            }
        }
    }

    log.sort();
    Ok(MarketDataset {
        first_day: raw.first_day,
        n_days,
        values,
        imputation_log: log,
    })
}

/// Reports gaps, non-finite cells and per-series coverage without
/// modifying anything.
pub fn validate(raw: &RawDataset) -> ValidationReport {
    let n_days = raw.n_days;
    let mut contiguity_gaps = Vec::new();
    let mut gap_day = vec![false; n_days];
    for d in 0..n_days {
        let base = d * HOURS_PER_DAY;
        let all_absent = SeriesId::ALL.iter().all(|s| {
            (0..HOURS_PER_DAY).all(|h| !raw.values[s.index()][base + h].is_finite())
        });
        if all_absent {
            contiguity_gaps.push(raw.date_of(d));
            gap_day[d] = true;
        }
    }

    let mut non_finite = Vec::new();
    let mut coverage = Vec::new();
    for series in SeriesId::ALL {
        let s = series.index();
        let mut finite = 0usize;
        for d in 0..n_days {
            for h in 0..HOURS_PER_DAY {
                let v = raw.values[s][d * HOURS_PER_DAY + h];
                if v.is_finite() {
                    finite += 1;
                } else if !gap_day[d] {
                    non_finite.push((raw.date_of(d), h as u8, series));
                }
            }
        }
        coverage.push((series, finite as f64 / (n_days * HOURS_PER_DAY) as f64));
    }
    non_finite.sort();

    ValidationReport {
        contiguity_gaps,
        non_finite,
        coverage,
    }
}

impl MarketDataset {
    /// Builds directly from per-series dense value arrays (tests,
    /// synthetic generators). Every cell must be finite.
    pub fn from_values(first_day: NaiveDate, values: Vec<Vec<f64>>) -> Result<MarketDataset> {
        let raw = RawDataset::from_values(first_day, values);
        for series in SeriesId::ALL {
            let s = series.index();
            for (i, v) in raw.values[s].iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::BoundaryGap {
                        date: raw.date_of(i / HOURS_PER_DAY),
                        series,
                        side: "before",
                    });
                }
            }
        }
        Ok(MarketDataset {
            first_day: raw.first_day,
            n_days: raw.n_days,
            values: raw.values,
            imputation_log: Vec::new(),
        })
    }

    pub fn first_day(&self) -> NaiveDate {
        self.first_day
    }

    pub fn last_day(&self) -> NaiveDate {
        self.first_day + Days::new(self.n_days as u64 - 1)
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn covers(&self, date: NaiveDate) -> bool {
        date >= self.first_day && date <= self.last_day()
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        if self.covers(date) {
            Some((date - self.first_day).num_days() as usize)
        } else {
            None
        }
    }

    /// Value lookup by date; `None` outside coverage.
    pub fn value(&self, series: SeriesId, date: NaiveDate, hour: u8) -> Option<f64> {
        self.day_index(date)
            .map(|d| self.values[series.index()][d * HOURS_PER_DAY + hour as usize])
    }

    /// Fast indexed lookup; callers must have checked coverage.
    pub fn value_at(&self, series: SeriesId, day_idx: usize, hour: u8) -> f64 {
        self.values[series.index()][day_idx * HOURS_PER_DAY + hour as usize]
    }

    pub fn imputation_log(&self) -> &[(NaiveDate, SeriesId)] {
        &self.imputation_log
    }

    /// View as a raw dataset (drops the imputation log).
    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            first_day: self.first_day,
            n_days: self.n_days,
            values: self.values.clone(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.to_raw())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.to_raw().write_csv(w)
    }
}
