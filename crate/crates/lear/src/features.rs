//! Lagged feature vectors and stacked design matrices.
//!
//! Each target day maps to one row: 96 price lags (lags 1, 2, 3, 7 for
//! each delivery hour), 360 exogenous entries (five forecast series at
//! lags 0, 1, 7 for each hour) and a 7-entry day-of-week one-hot block,
//! in that fixed order. The target day's own price is only ever used as
//! the regression target.

use chrono::{Datelike, Days, NaiveDate};

use crate::market_data::{MarketDataset, SeriesId, HOURS_PER_DAY};
use crate::mat::ColMatrix;
use crate::{Error, Result};

/// Price lags, in calendar days before the target day.
pub const PRICE_LAGS: [u32; 4] = [1, 2, 3, 7];
/// Exogenous-forecast lags; lag 0 is the day-ahead forecast for the
/// target day itself, which the market publishes before delivery.
pub const EXOG_LAGS: [u32; 3] = [0, 1, 7];
pub const NUM_DUMMIES: usize = 7;

/// Identity of one feature in the canonical ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureName {
    PriceLag { lag: u32, hour: u8 },
    Exogenous { series: SeriesId, lag: u32, hour: u8 },
    DayOfWeek { weekday: u8 },
}

/// Grouping key used by attribution summaries: price lags together,
/// each exogenous series on its own, dummies together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FamilyKey {
    PriceLags,
    Exogenous(SeriesId),
    DayOfWeek,
}

impl FamilyKey {
    pub const ALL: [FamilyKey; 7] = [
        FamilyKey::PriceLags,
        FamilyKey::Exogenous(SeriesId::GenForecastFR),
        FamilyKey::Exogenous(SeriesId::LoadForecastFR),
        FamilyKey::Exogenous(SeriesId::WindForecastBE),
        FamilyKey::Exogenous(SeriesId::SolarForecastBE),
        FamilyKey::Exogenous(SeriesId::LoadForecastBE),
        FamilyKey::DayOfWeek,
    ];

    pub fn label(&self) -> String {
        match self {
            FamilyKey::PriceLags => "price".to_string(),
            FamilyKey::Exogenous(s) => s.name().to_string(),
            FamilyKey::DayOfWeek => "dow".to_string(),
        }
    }
}

impl FeatureName {
    /// Serialized form: `price.lag{L}.h{H}`, `{series}.lag{L}.h{H}`,
    /// `dow.{W}`.
    pub fn label(&self) -> String {
        match self {
            FeatureName::PriceLag { lag, hour } => format!("price.lag{lag}.h{hour}"),
            FeatureName::Exogenous { series, lag, hour } => {
                format!("{}.lag{lag}.h{hour}", series.name())
            }
            FeatureName::DayOfWeek { weekday } => format!("dow.{weekday}"),
        }
    }

    pub fn parse(s: &str) -> Option<FeatureName> {
        if let Some(w) = s.strip_prefix("dow.") {
            let weekday: u8 = w.parse().ok()?;
            return (weekday < 7).then_some(FeatureName::DayOfWeek { weekday });
        }
        let mut parts = s.split('.');
        let head = parts.next()?;
        let lag: u32 = parts.next()?.strip_prefix("lag")?.parse().ok()?;
        let hour: u8 = parts.next()?.strip_prefix('h')?.parse().ok()?;
        if parts.next().is_some() || hour >= 24 {
            return None;
        }
        if head == "price" {
            PRICE_LAGS
                .contains(&lag)
                .then_some(FeatureName::PriceLag { lag, hour })
        } else {
            let series = SeriesId::parse(head)?;
            (series != SeriesId::PriceBE && EXOG_LAGS.contains(&lag))
                .then_some(FeatureName::Exogenous { series, lag, hour })
        }
    }

    pub fn family(&self) -> FamilyKey {
        match self {
            FeatureName::PriceLag { .. } => FamilyKey::PriceLags,
            FeatureName::Exogenous { series, .. } => FamilyKey::Exogenous(*series),
            FeatureName::DayOfWeek { .. } => FamilyKey::DayOfWeek,
        }
    }
}

/// The canonical feature ordering for the six-series configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCatalog {
    names: Vec<FeatureName>,
    dummy_start: usize,
}

impl FeatureCatalog {
    pub fn standard() -> FeatureCatalog {
        let mut names = Vec::with_capacity(
            HOURS_PER_DAY * PRICE_LAGS.len()
                + HOURS_PER_DAY * SeriesId::EXOGENOUS.len() * EXOG_LAGS.len()
                + NUM_DUMMIES,
        );
        for lag in PRICE_LAGS {
            for hour in 0..HOURS_PER_DAY as u8 {
                names.push(FeatureName::PriceLag { lag, hour });
            }
        }
        for series in SeriesId::EXOGENOUS {
            for lag in EXOG_LAGS {
                for hour in 0..HOURS_PER_DAY as u8 {
                    names.push(FeatureName::Exogenous { series, lag, hour });
                }
            }
        }
        let dummy_start = names.len();
        for weekday in 0..NUM_DUMMIES as u8 {
            names.push(FeatureName::DayOfWeek { weekday });
        }
        FeatureCatalog { names, dummy_start }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[FeatureName] {
        &self.names
    }

    pub fn name(&self, idx: usize) -> FeatureName {
        self.names[idx]
    }

    pub fn index_of(&self, name: &FeatureName) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Day-of-week dummy columns are kept raw 0/1 by the scaler.
    pub fn is_dummy(&self, idx: usize) -> bool {
        idx >= self.dummy_start
    }

    /// Builds the feature row for one target day.
    pub fn build_row(&self, ds: &MarketDataset, target_day: NaiveDate) -> Result<FeatureVector> {
        let required_first = target_day - Days::new(*PRICE_LAGS.iter().max().unwrap() as u64);
        if !ds.covers(required_first) || !ds.covers(target_day) {
            return Err(Error::InsufficientHistory {
                required_first,
                required_last: target_day,
            });
        }
        let target_idx = ds.day_index(target_day).unwrap();
        let mut values = Vec::with_capacity(self.len());
        for lag in PRICE_LAGS {
            let day = target_idx - lag as usize;
            for hour in 0..HOURS_PER_DAY as u8 {
                values.push(ds.value_at(SeriesId::PriceBE, day, hour));
            }
        }
        for series in SeriesId::EXOGENOUS {
            for lag in EXOG_LAGS {
                let day = target_idx - lag as usize;
                for hour in 0..HOURS_PER_DAY as u8 {
                    values.push(ds.value_at(series, day, hour));
                }
            }
        }
        values.extend_from_slice(&day_of_week_dummy(target_day));
        Ok(FeatureVector { target_day, values })
    }

    /// Stacks one row per day of `[first_day, last_day]` plus per-hour
    /// target price vectors.
    pub fn build_training_set(
        &self,
        ds: &MarketDataset,
        first_day: NaiveDate,
        last_day: NaiveDate,
    ) -> Result<DesignMatrix> {
        assert!(first_day <= last_day, "window must be non-empty");
        let n_rows = (last_day - first_day).num_days() as usize + 1;
        let mut rows = Vec::with_capacity(n_rows);
        let mut days = Vec::with_capacity(n_rows);
        for k in 0..n_rows {
            let day = first_day + Days::new(k as u64);
            rows.push(self.build_row(ds, day)?);
            days.push(day);
        }
        let x = ColMatrix::from_fn(n_rows, self.len(), |i, j| rows[i].values[j]);
        let mut targets = vec![vec![0.0; n_rows]; HOURS_PER_DAY];
        for (k, day) in days.iter().enumerate() {
            let idx = ds.day_index(*day).unwrap();
            for (hour, target) in targets.iter_mut().enumerate() {
                target[k] = ds.value_at(SeriesId::PriceBE, idx, hour as u8);
            }
        }
        Ok(DesignMatrix {
            catalog: self.clone(),
            days,
            x,
            targets,
            window: (first_day, last_day),
        })
    }
}

/// One-hot weekday encoding, Monday = index 0.
pub fn day_of_week_dummy(date: NaiveDate) -> [f64; NUM_DUMMIES] {
    let mut v = [0.0; NUM_DUMMIES];
    v[date.weekday().num_days_from_monday() as usize] = 1.0;
    v
}

/// Feature row for one target day, in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub target_day: NaiveDate,
    pub values: Vec<f64>,
}

/// Training rows for one calibration window.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    catalog: FeatureCatalog,
    days: Vec<NaiveDate>,
    x: ColMatrix,
    /// `targets[h][k]` = observed price at `days[k]`, delivery hour `h`.
    targets: Vec<Vec<f64>>,
    window: (NaiveDate, NaiveDate),
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn x(&self) -> &ColMatrix {
        &self.x
    }

    pub fn targets(&self, hour: u8) -> &[f64] {
        &self.targets[hour as usize]
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn window(&self) -> (NaiveDate, NaiveDate) {
        self.window
    }

    pub fn catalog(&self) -> &FeatureCatalog {
        &self.catalog
    }

    #[cfg(test)]
    pub(crate) fn from_parts(
        catalog: FeatureCatalog,
        days: Vec<NaiveDate>,
        x: ColMatrix,
        targets: Vec<Vec<f64>>,
    ) -> DesignMatrix {
        let window = (days[0], *days.last().unwrap());
        DesignMatrix {
            catalog,
            days,
            x,
            targets,
            window,
        }
    }
}
