//! Rolling calibration and 24-hour-ahead prediction.
//!
//! Each calibration builds one design matrix on the trailing window,
//! fits one scaler, then fits 24 independent per-hour LASSO regressions
//! (shared feature rows, hour-specific targets), each with its own
//! information-criterion-selected penalty. The day loop is sequential;
//! the 24 hourly fits within a calibration run in parallel.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureCatalog, FeatureName, PRICE_LAGS};
use crate::lasso::{
    select_lambda, FitOptions, LambdaGrid, LassoFit, SelectionCriterion,
};
use crate::market_data::{MarketDataset, SeriesId, HOURS_PER_DAY};
use crate::scaling::{fit_scaler, ScalerParams, ScalingMethod};
use crate::{Error, Result};

/// Trailing calibration span; always ends the day before the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationWindow {
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub length_days: u32,
}

impl CalibrationWindow {
    pub fn for_target(target_day: NaiveDate, length_days: u32) -> CalibrationWindow {
        assert!(length_days >= 1);
        CalibrationWindow {
            first_day: target_day - Days::new(length_days as u64),
            last_day: target_day - Days::new(1),
            length_days,
        }
    }
}

/// Knobs for calibration and the backtest loop.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub window_length: u32,
    pub scaling: ScalingMethod,
    pub criterion: SelectionCriterion,
    pub grid: LambdaGrid,
    pub fit: FitOptions,
    /// Recalibrate every this many days along the backtest horizon.
    pub recalib_every: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            window_length: 365,
            scaling: ScalingMethod::MedianMadAsinh,
            criterion: SelectionCriterion::Aic,
            grid: LambdaGrid::default(),
            fit: FitOptions::default(),
            recalib_every: 1,
        }
    }
}

/// The 24 per-hour fits sharing one window and one scaler.
#[derive(Debug, Clone)]
pub struct LearModelSet {
    pub hour_fits: Vec<LassoFit>,
    pub scaler: ScalerParams,
    pub catalog: FeatureCatalog,
    pub calibrated_for: NaiveDate,
    pub window: CalibrationWindow,
}

/// One day of predictions, with actuals when the dataset has them.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDay {
    pub target_day: NaiveDate,
    pub predicted: Vec<f64>,
    pub actual: Option<Vec<f64>>,
    /// Calibration date of the model that produced this forecast.
    pub model_ref: NaiveDate,
}

/// Calibrates the full 24-hour model set for `target_day` on the
/// trailing window of `cfg.window_length` days.
pub fn calibrate(
    ds: &MarketDataset,
    target_day: NaiveDate,
    cfg: &EngineConfig,
) -> Result<LearModelSet> {
    let window = CalibrationWindow::for_target(target_day, cfg.window_length);
    let catalog = FeatureCatalog::standard();
    let matrix = catalog.build_training_set(ds, window.first_day, window.last_day)?;
    let scaler = fit_scaler(&matrix, cfg.scaling)?;
    let x_norm = scaler.transform_matrix(matrix.x())?;

    let hour_fits: Vec<LassoFit> = (0..HOURS_PER_DAY as u8)
        .into_par_iter()
        .map(|hour| {
            let y_norm: Vec<f64> = matrix
                .targets(hour)
                .iter()
                .map(|&y| scaler.transform_target(hour, y))
                .collect();
            select_lambda(&x_norm, &y_norm, cfg.criterion, &cfg.grid, &cfg.fit)
                .map(|sel| sel.fit)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(LearModelSet {
        hour_fits,
        scaler,
        catalog,
        calibrated_for: target_day,
        window,
    })
}

/// Predicts the 24 prices of the exact day the models were calibrated
/// for.
pub fn predict(
    models: &LearModelSet,
    ds: &MarketDataset,
    target_day: NaiveDate,
) -> Result<ForecastDay> {
    if models.calibrated_for != target_day {
        return Err(Error::ModelDateMismatch {
            calibrated_for: models.calibrated_for,
            requested: target_day,
        });
    }
    predict_with(models, ds, target_day)
}

/// Predicts with a possibly stale model set: the target may postdate
/// the calibration date (backtests reusing a model between
/// recalibrations), never precede it.
pub fn predict_with(
    models: &LearModelSet,
    ds: &MarketDataset,
    target_day: NaiveDate,
) -> Result<ForecastDay> {
    if target_day < models.calibrated_for {
        return Err(Error::ModelDateMismatch {
            calibrated_for: models.calibrated_for,
            requested: target_day,
        });
    }
    let row = models.catalog.build_row(ds, target_day)?;
    let x_norm = models.scaler.transform_vector(&row.values)?;
    let mut predicted = Vec::with_capacity(HOURS_PER_DAY);
    for (hour, fit) in models.hour_fits.iter().enumerate() {
        let y_norm = fit.predict_one(&x_norm);
        let price = models.scaler.inverse_transform_target(hour as u8, y_norm);
        if !price.is_finite() {
            return Err(Error::NonFinitePrediction {
                day: target_day,
                hour: hour as u8,
            });
        }
        predicted.push(price);
    }
    let actual = (0..HOURS_PER_DAY as u8)
        .map(|h| ds.value(SeriesId::PriceBE, target_day, h))
        .collect::<Option<Vec<f64>>>();
    Ok(ForecastDay {
        target_day,
        predicted,
        actual,
        model_ref: models.calibrated_for,
    })
}

/// Result of a rolling backtest.
#[derive(Debug, Clone)]
pub struct BacktestRun {
    pub forecasts: Vec<ForecastDay>,
    pub calibrations: usize,
    /// Non-fatal notes, e.g. hourly fits that hit the sweep cap.
    pub warnings: Vec<String>,
}

/// First day that leaves room for the calibration window plus the
/// 7-day feature lag.
pub fn earliest_feasible_start(ds: &MarketDataset, window_length: u32) -> NaiveDate {
    ds.first_day() + Days::new(window_length as u64 + *PRICE_LAGS.iter().max().unwrap() as u64)
}

/// Walks the horizon day by day, recalibrating on schedule and
/// predicting every day. See [`rolling_backtest_with`] to also receive
/// each calibrated model set (snapshots).
pub fn rolling_backtest(
    ds: &MarketDataset,
    start_day: NaiveDate,
    end_day: NaiveDate,
    cfg: &EngineConfig,
) -> Result<BacktestRun> {
    rolling_backtest_with(ds, start_day, end_day, cfg, |_| Ok(()))
}

pub fn rolling_backtest_with(
    ds: &MarketDataset,
    start_day: NaiveDate,
    end_day: NaiveDate,
    cfg: &EngineConfig,
    mut on_calibration: impl FnMut(&LearModelSet) -> Result<()>,
) -> Result<BacktestRun> {
    assert!(start_day <= end_day, "empty horizon");
    assert!(cfg.recalib_every >= 1);
    let max_lag = *PRICE_LAGS.iter().max().unwrap() as u64;
    let required_first = start_day - Days::new(cfg.window_length as u64 + max_lag);
    if !ds.covers(required_first) || !ds.covers(end_day) {
        return Err(Error::InsufficientHistory {
            required_first,
            required_last: end_day,
        });
    }

    let horizon = (end_day - start_day).num_days() as usize + 1;
    let mut forecasts = Vec::with_capacity(horizon);
    let mut warnings = Vec::new();
    let mut calibrations = 0usize;
    let mut models: Option<LearModelSet> = None;

    for offset in 0..horizon {
        let day = start_day + Days::new(offset as u64);
        if offset % cfg.recalib_every as usize == 0 {
            let m = calibrate(ds, day, cfg)?;
            for (hour, fit) in m.hour_fits.iter().enumerate() {
                if !fit.converged {
                    warnings.push(format!(
                        "calibration {day}: hour {hour} fit did not converge after {} sweeps",
                        fit.iterations
                    ));
                }
            }
            on_calibration(&m)?;
            calibrations += 1;
            models = Some(m);
        }
        let m = models.as_ref().expect("first day always calibrates");
        forecasts.push(predict_with(m, ds, day)?);
    }

    Ok(BacktestRun {
        forecasts,
        calibrations,
        warnings,
    })
}

/// Writes the backtest output CSV: `day,hour,actual,predicted`.
pub fn write_forecasts_csv<W: std::io::Write>(
    forecasts: &[ForecastDay],
    mut w: W,
) -> Result<()> {
    writeln!(w, "day,hour,actual,predicted")?;
    for fd in forecasts {
        for hour in 0..HOURS_PER_DAY {
            let actual = fd
                .actual
                .as_ref()
                .map(|a| a[hour].to_string())
                .unwrap_or_default();
            writeln!(w, "{},{},{},{}", fd.target_day, hour, actual, fd.predicted[hour])?;
        }
    }
    Ok(())
}

/// One row of a forecasts CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastRow {
    pub day: NaiveDate,
    pub hour: u8,
    pub actual: Option<f64>,
    pub predicted: f64,
}

pub fn read_forecasts_csv<R: std::io::Read>(source: R) -> Result<Vec<ForecastRow>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| Error::MalformedRow { line, reason };
        let day: NaiveDate = record[0]
            .parse()
            .map_err(|e| bad(format!("bad day: {e}")))?;
        let hour: u8 = record[1]
            .parse()
            .map_err(|e| bad(format!("bad hour: {e}")))?;
        let actual = if record[2].is_empty() {
            None
        } else {
            Some(record[2].parse().map_err(|e| bad(format!("bad actual: {e}")))?)
        };
        let predicted: f64 = record[3]
            .parse()
            .map_err(|e| bad(format!("bad predicted: {e}")))?;
        rows.push(ForecastRow {
            day,
            hour,
            actual,
            predicted,
        });
    }
    Ok(rows)
}

/// Serializable form of a [`LearModelSet`]: feature names, nonzero
/// coefficients, intercepts, penalties, scaler and window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub target_day: NaiveDate,
    pub window: CalibrationWindow,
    pub scaler: ScalerParams,
    pub hours: Vec<HourSnapshot>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HourSnapshot {
    pub hour: u8,
    pub lambda: f64,
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
}

impl ModelSnapshot {
    pub fn from_model(models: &LearModelSet) -> ModelSnapshot {
        let hours = models
            .hour_fits
            .iter()
            .enumerate()
            .map(|(hour, fit)| {
                let coefficients = fit
                    .coefficients
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c != 0.0)
                    .map(|(j, &c)| (models.catalog.name(j).label(), c))
                    .collect();
                HourSnapshot {
                    hour: hour as u8,
                    lambda: fit.lambda,
                    intercept: fit.intercept,
                    coefficients,
                }
            })
            .collect();
        ModelSnapshot {
            target_day: models.calibrated_for,
            window: models.window,
            scaler: models.scaler.clone(),
            hours,
        }
    }

    /// Rebuilds a usable model set. Solver diagnostics (iteration
    /// counts) are not stored, so restored fits read as converged with
    /// zero iterations.
    pub fn into_model(mut self) -> Result<LearModelSet> {
        let catalog = FeatureCatalog::standard();
        self.scaler.rebuild_passthrough(&catalog)?;
        if self.hours.len() != HOURS_PER_DAY {
            return Err(Error::InvalidSnapshot(format!(
                "expected 24 hourly fits, found {}",
                self.hours.len()
            )));
        }
        let mut hour_fits = vec![None; HOURS_PER_DAY];
        for h in &self.hours {
            let mut coefficients = vec![0.0; catalog.len()];
            for (label, &value) in &h.coefficients {
                let name = FeatureName::parse(label).ok_or_else(|| {
                    Error::InvalidSnapshot(format!("unknown feature '{label}'"))
                })?;
                let idx = catalog.index_of(&name).ok_or_else(|| {
                    Error::InvalidSnapshot(format!("feature '{label}' not in catalog"))
                })?;
                coefficients[idx] = value;
            }
            if h.hour as usize >= HOURS_PER_DAY || hour_fits[h.hour as usize].is_some() {
                return Err(Error::InvalidSnapshot(format!("bad hour {}", h.hour)));
            }
            hour_fits[h.hour as usize] = Some(LassoFit {
                coefficients,
                intercept: h.intercept,
                lambda: h.lambda,
                iterations: 0,
                converged: true,
            });
        }
        Ok(LearModelSet {
            hour_fits: hour_fits.into_iter().map(Option::unwrap).collect(),
            scaler: self.scaler,
            catalog,
            calibrated_for: self.target_day,
            window: self.window,
        })
    }
}
