//! Day-ahead electricity price forecasting with LASSO-estimated
//! autoregressive (LEAR) models.
//!
//! The pipeline runs in four stages, each with its own module:
//!
//! 1. [`market_data`] — parse, calendar-align and impute the hourly
//!    market dataset (spot prices plus five exogenous day-ahead
//!    forecast series).
//! 2. [`features`] / [`scaling`] — build the lagged design matrix for a
//!    calibration window and normalize it.
//! 3. [`lasso`] / [`engine`] — fit 24 per-hour L1-penalized regressions
//!    on a rolling one-year window and predict the next day's 24 prices.
//! 4. [`attribution`] / [`diagnostics`] — decompose each prediction into
//!    coefficient-times-feature contributions and segment forecast
//!    errors by extreme-price conditions (negative prices, spikes).
//!
//! ```
//! use lear::engine::{self, EngineConfig};
//! use lear::synth;
//!
//! let ds = synth::smooth_dataset(7, chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 120);
//! let cfg = EngineConfig { window_length: 60, ..EngineConfig::default() };
//! let day = ds.first_day() + chrono::Days::new(80);
//! let models = engine::calibrate(&ds, day, &cfg).unwrap();
//! let forecast = engine::predict(&models, &ds, day).unwrap();
//! assert_eq!(forecast.predicted.len(), 24);
//! ```

pub mod attribution;
pub mod diagnostics;
pub mod engine;
pub mod features;
pub mod lasso;
pub mod market_data;
mod mat;
pub mod scaling;
pub mod synth;

pub use mat::ColMatrix;

use chrono::NaiveDate;
use market_data::SeriesId;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A CSV row could not be parsed.
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    /// The same (timestamp, series) pair appeared more than once.
    #[error("duplicate timestamp {date}T{hour:02}:00 for series {series}")]
    DuplicateTimestamp {
        date: NaiveDate,
        hour: u8,
        series: SeriesId,
    },
    /// A series name outside the closed six-series enumeration.
    #[error("unknown series name '{0}'")]
    UnknownSeries(String),
    /// A missing day with no fully-present neighbor on one side.
    #[error("cannot impute {date} for {series}: no fully-present day {side} it")]
    BoundaryGap {
        date: NaiveDate,
        series: SeriesId,
        side: &'static str,
    },
    /// A series with no data at all.
    #[error("series {0} has no data")]
    EmptySeries(SeriesId),
    /// The dataset does not cover the span a computation needs.
    #[error("insufficient history: need coverage from {required_first} to {required_last}")]
    InsufficientHistory {
        required_first: NaiveDate,
        required_last: NaiveDate,
    },
    /// A design-matrix column is entirely non-finite.
    #[error("degenerate design matrix: column {0} has no finite entries")]
    DegenerateMatrix(usize),
    /// Fewer rows than the scaler needs.
    #[error("design matrix has {0} rows; at least 2 required")]
    TooFewRows(usize),
    /// Vector length does not match the fitted parameter count.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    /// A model calibrated for one day was asked to predict an earlier day.
    #[error("model calibrated for {calibrated_for} cannot predict {requested}")]
    ModelDateMismatch {
        calibrated_for: NaiveDate,
        requested: NaiveDate,
    },
    /// A prediction came out non-finite.
    #[error("non-finite prediction for {day} hour {hour}")]
    NonFinitePrediction { day: NaiveDate, hour: u8 },
    /// Metric computation over zero records.
    #[error("empty input: no records")]
    EmptyInput,
    /// A model snapshot that cannot be mapped back onto the feature set.
    #[error("invalid model snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
