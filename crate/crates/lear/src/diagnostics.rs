//! Forecast error metrics, error-vs-price points and extreme-condition
//! segmentation (negative prices and spikes).

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::engine::{BacktestRun, ForecastRow};
use crate::market_data::{MarketDataset, SeriesId, HOURS_PER_DAY};
use crate::{Error, Result};

/// One (day, hour) forecast error; `error = actual − predicted`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub day: NaiveDate,
    pub hour: u8,
    pub actual: f64,
    pub predicted: f64,
    pub error: f64,
}

impl ErrorRecord {
    pub fn new(day: NaiveDate, hour: u8, actual: f64, predicted: f64) -> ErrorRecord {
        ErrorRecord {
            day,
            hour,
            actual,
            predicted,
            error: actual - predicted,
        }
    }
}

/// Flattens a backtest into error records; days without actuals are
/// skipped.
pub fn records_from_run(run: &BacktestRun) -> Vec<ErrorRecord> {
    let mut out = Vec::new();
    for fd in &run.forecasts {
        if let Some(actual) = &fd.actual {
            for hour in 0..HOURS_PER_DAY {
                out.push(ErrorRecord::new(
                    fd.target_day,
                    hour as u8,
                    actual[hour],
                    fd.predicted[hour],
                ));
            }
        }
    }
    out
}

pub fn records_from_rows(rows: &[ForecastRow]) -> Vec<ErrorRecord> {
    rows.iter()
        .filter_map(|r| {
            r.actual
                .map(|actual| ErrorRecord::new(r.day, r.hour, actual, r.predicted))
        })
        .collect()
}

/// Standard point-forecast accuracy metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub count: usize,
    pub mae: f64,
    pub rmse: f64,
    /// Mean `2|e| / (|actual| + |predicted|)`; hours whose denominator
    /// falls below 1e-6 are skipped, `None` if all were.
    pub smape: Option<f64>,
    /// Mean error: positive means under-prediction.
    pub bias: f64,
}

pub fn compute_metrics(records: &[ErrorRecord]) -> Result<Metrics> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = records.len() as f64;
    let mae = records.iter().map(|r| r.error.abs()).sum::<f64>() / n;
    let rmse = (records.iter().map(|r| r.error * r.error).sum::<f64>() / n).sqrt();
    let bias = records.iter().map(|r| r.error).sum::<f64>() / n;
    let mut smape_sum = 0.0;
    let mut smape_n = 0usize;
    for r in records {
        let denom = r.actual.abs() + r.predicted.abs();
        if denom >= 1e-6 {
            smape_sum += 2.0 * r.error.abs() / denom;
            smape_n += 1;
        }
    }
    let smape = (smape_n > 0).then(|| smape_sum / smape_n as f64);
    Ok(Metrics {
        count: records.len(),
        mae,
        rmse,
        smape,
        bias,
    })
}

/// (actual price, error) pairs for the error-vs-price scatter.
pub fn error_price_points(records: &[ErrorRecord]) -> Vec<(f64, f64)> {
    records.iter().map(|r| (r.actual, r.error)).collect()
}

pub fn write_error_price_csv<W: std::io::Write>(
    records: &[ErrorRecord],
    mut w: W,
) -> Result<()> {
    writeln!(w, "actual,error")?;
    for (actual, error) in error_price_points(records) {
        writeln!(w, "{actual},{error}")?;
    }
    Ok(())
}

/// Extreme-condition classes. Negative prices take precedence over
/// spikes; the optional low-price class sits between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    NegativePrice,
    LowPrice,
    Spike,
    Normal,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::NegativePrice,
        EventKind::LowPrice,
        EventKind::Spike,
        EventKind::Normal,
    ];
}

/// A label plus the rolling statistics that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventLabel {
    pub kind: EventKind,
    pub rolling_mean: f64,
    pub rolling_sd: f64,
    /// `rolling_mean + sigma·rolling_sd`; prices strictly above are
    /// spikes.
    pub spike_threshold: f64,
}

/// Thresholding policy for [`label_extremes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    /// Trailing window over which the rolling statistics run.
    pub window_days: u32,
    /// Spike threshold in rolling standard deviations.
    pub sigma: f64,
    /// When set, prices below this quantile of the trailing window form
    /// their own low-price class.
    pub low_quantile: Option<f64>,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            window_days: 30,
            sigma: 3.0,
            low_quantile: None,
        }
    }
}

struct WindowStats {
    mean: f64,
    sd: f64,
    low_cut: Option<f64>,
}

/// Rolling statistics over all hours of the `window_days` days strictly
/// before `day`.
fn window_stats(
    ds: &MarketDataset,
    day: NaiveDate,
    cfg: &LabelConfig,
) -> Result<WindowStats> {
    let window_first = day - Days::new(cfg.window_days as u64);
    let window_last = day - Days::new(1);
    if !ds.covers(window_first) || !ds.covers(window_last) {
        return Err(Error::InsufficientHistory {
            required_first: window_first,
            required_last: day,
        });
    }
    let first_idx = ds.day_index(window_first).unwrap();
    let last_idx = ds.day_index(window_last).unwrap();
    let mut values = Vec::with_capacity((last_idx - first_idx + 1) * HOURS_PER_DAY);
    for d in first_idx..=last_idx {
        for h in 0..HOURS_PER_DAY as u8 {
            values.push(ds.value_at(SeriesId::PriceBE, d, h));
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let low_cut = cfg.low_quantile.map(|q| {
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((sorted.len() - 1) as f64 * q.clamp(0.0, 1.0)).floor() as usize;
        sorted[idx]
    });
    Ok(WindowStats { mean, sd, low_cut })
}

fn label_with_stats(actual: f64, stats: &WindowStats, cfg: &LabelConfig) -> EventLabel {
    let spike_threshold = stats.mean + cfg.sigma * stats.sd;
    let kind = if actual < 0.0 {
        EventKind::NegativePrice
    } else if stats.low_cut.is_some_and(|cut| actual < cut) {
        EventKind::LowPrice
    } else if actual > spike_threshold {
        EventKind::Spike
    } else {
        EventKind::Normal
    };
    EventLabel {
        kind,
        rolling_mean: stats.mean,
        rolling_sd: stats.sd,
        spike_threshold,
    }
}

/// Labels the actual price at (day, hour) against rolling statistics of
/// the trailing window. Labels depend on actual prices only, never on
/// forecasts.
pub fn label_extremes(
    ds: &MarketDataset,
    day: NaiveDate,
    hour: u8,
    cfg: &LabelConfig,
) -> Result<EventLabel> {
    let stats = window_stats(ds, day, cfg)?;
    let actual = ds
        .value(SeriesId::PriceBE, day, hour)
        .ok_or(Error::InsufficientHistory {
            required_first: day,
            required_last: day,
        })?;
    Ok(label_with_stats(actual, &stats, cfg))
}

/// Labels a whole record set, caching the per-day rolling statistics.
pub fn label_records(
    ds: &MarketDataset,
    records: &[ErrorRecord],
    cfg: &LabelConfig,
) -> Result<Vec<EventLabel>> {
    let mut cache: BTreeMap<NaiveDate, WindowStats> = BTreeMap::new();
    let mut labels = Vec::with_capacity(records.len());
    for r in records {
        if !cache.contains_key(&r.day) {
            cache.insert(r.day, window_stats(ds, r.day, cfg)?);
        }
        // Label from the record's own actual: identical to the dataset
        // price for backtest output, but robust to rounding in files.
        labels.push(label_with_stats(r.actual, &cache[&r.day], cfg));
    }
    Ok(labels)
}

/// Error metrics for one label class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub label: EventKind,
    pub count: usize,
    pub share: f64,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub mean_error: Option<f64>,
}

/// Per-segment metrics plus the headline comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub total: usize,
    pub segments: Vec<SegmentStats>,
    /// `Some(true)` when spike hours are harder than normal hours;
    /// `None` when either segment is empty.
    pub spike_mae_exceeds_normal: Option<bool>,
    pub negative_mae_exceeds_normal: Option<bool>,
}

impl SegmentReport {
    pub fn segment(&self, kind: EventKind) -> &SegmentStats {
        self.segments.iter().find(|s| s.label == kind).unwrap()
    }
}

/// Splits records by label and reports per-segment accuracy. Empty
/// segments keep count 0 and null metrics.
pub fn segment_report(records: &[ErrorRecord], labels: &[EventLabel]) -> SegmentReport {
    assert_eq!(records.len(), labels.len(), "records and labels misaligned");
    let total = records.len();
    let mut segments = Vec::with_capacity(EventKind::ALL.len());
    for kind in EventKind::ALL {
        let subset: Vec<ErrorRecord> = records
            .iter()
            .zip(labels)
            .filter(|(_, l)| l.kind == kind)
            .map(|(r, _)| *r)
            .collect();
        let stats = match compute_metrics(&subset) {
            Ok(m) => SegmentStats {
                label: kind,
                count: subset.len(),
                share: if total > 0 {
                    subset.len() as f64 / total as f64
                } else {
                    0.0
                },
                mae: Some(m.mae),
                rmse: Some(m.rmse),
                mean_error: Some(m.bias),
            },
            Err(_) => SegmentStats {
                label: kind,
                count: 0,
                share: 0.0,
                mae: None,
                rmse: None,
                mean_error: None,
            },
        };
        segments.push(stats);
    }

    let mae_of = |kind: EventKind| {
        segments
            .iter()
            .find(|s| s.label == kind)
            .and_then(|s| s.mae)
    };
    let normal = mae_of(EventKind::Normal);
    let compare = |other: Option<f64>| match (other, normal) {
        (Some(o), Some(n)) => Some(o > n),
        _ => None,
    };
    SegmentReport {
        total,
        spike_mae_exceeds_normal: compare(mae_of(EventKind::Spike)),
        negative_mae_exceeds_normal: compare(mae_of(EventKind::NegativePrice)),
        segments,
    }
}
