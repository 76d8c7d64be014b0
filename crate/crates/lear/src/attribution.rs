//! Decomposes each hourly prediction into per-feature contribution
//! terms: coefficient × normalized feature value. The terms plus the
//! regression intercept reproduce the normalized prediction exactly,
//! and its inverse transform reproduces the emitted price.
//!
//! Contributions live in normalized space; the price-space prediction
//! is attached separately because the asinh inverse does not distribute
//! over sums. Under z-scoring the transform is affine, so price-space
//! bar charts of the terms are faithful there; the report carries the
//! method tag so consumers can tell.

use chrono::NaiveDate;

use crate::engine::LearModelSet;
use crate::features::{FamilyKey, FeatureCatalog, FeatureName};
use crate::market_data::MarketDataset;
use crate::scaling::ScalingMethod;
use crate::{Error, Result};

/// One feature's additive share of a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub feature: FeatureName,
    pub coefficient: f64,
    pub feature_value_normalized: f64,
    /// Exactly `coefficient * feature_value_normalized`.
    pub product: f64,
}

/// Full decomposition of one (day, hour) prediction.
#[derive(Debug, Clone)]
pub struct AttributionReport {
    pub target_day: NaiveDate,
    pub hour: u8,
    pub contributions: Vec<Contribution>,
    /// The unpenalized regression constant (the "b-value").
    pub intercept: f64,
    pub normalized_prediction: f64,
    pub price_prediction: f64,
    pub scaling_method: ScalingMethod,
    pub family_totals: Vec<(FamilyKey, f64)>,
}

/// Sparse decomposition: one contribution per nonzero coefficient.
pub fn decompose(
    models: &LearModelSet,
    ds: &MarketDataset,
    target_day: NaiveDate,
    hour: u8,
) -> Result<AttributionReport> {
    decompose_impl(models, ds, target_day, hour, false)
}

/// Dense decomposition: every feature listed, zero coefficients included.
pub fn decompose_dense(
    models: &LearModelSet,
    ds: &MarketDataset,
    target_day: NaiveDate,
    hour: u8,
) -> Result<AttributionReport> {
    decompose_impl(models, ds, target_day, hour, true)
}

fn decompose_impl(
    models: &LearModelSet,
    ds: &MarketDataset,
    target_day: NaiveDate,
    hour: u8,
    dense: bool,
) -> Result<AttributionReport> {
    if target_day < models.calibrated_for {
        return Err(Error::ModelDateMismatch {
            calibrated_for: models.calibrated_for,
            requested: target_day,
        });
    }
    let row = models.catalog.build_row(ds, target_day)?;
    let x_norm = models.scaler.transform_vector(&row.values)?;
    let fit = &models.hour_fits[hour as usize];

    let contributions: Vec<Contribution> = fit
        .coefficients
        .iter()
        .enumerate()
        .filter(|(_, &c)| dense || c != 0.0)
        .map(|(j, &coefficient)| Contribution {
            feature: models.catalog.name(j),
            coefficient,
            feature_value_normalized: x_norm[j],
            product: coefficient * x_norm[j],
        })
        .collect();

    // Same dot product as predict() so the additivity identity is
    // checked against the real prediction path.
    let normalized_prediction = fit.predict_one(&x_norm);
    let price_prediction = models
        .scaler
        .inverse_transform_target(hour, normalized_prediction);
    let family_totals = group_by_family(&contributions);

    Ok(AttributionReport {
        target_day,
        hour,
        contributions,
        intercept: fit.intercept,
        normalized_prediction,
        price_prediction,
        scaling_method: models.scaler.method,
        family_totals,
    })
}

/// Sums products over each family: price lags together, each exogenous
/// series on its own, the dummy block as one. Every family appears,
/// zero when it contributed nothing.
pub fn group_by_family(contributions: &[Contribution]) -> Vec<(FamilyKey, f64)> {
    FamilyKey::ALL
        .iter()
        .map(|&key| {
            let total = contributions
                .iter()
                .filter(|c| c.feature.family() == key)
                .map(|c| c.product)
                .sum();
            (key, total)
        })
        .collect()
}

/// One row of the influence ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceEntry {
    pub feature: FeatureName,
    pub mean_abs_product: f64,
}

/// Ranks features by mean |product| over a period of reports; ties
/// break by canonical feature order. Features that never contributed
/// are omitted.
pub fn rank_influences(reports: &[AttributionReport]) -> Vec<InfluenceEntry> {
    assert!(!reports.is_empty(), "need at least one report");
    let catalog = FeatureCatalog::standard();
    let mut sums = vec![0.0f64; catalog.len()];
    for report in reports {
        for c in &report.contributions {
            if let Some(idx) = catalog.index_of(&c.feature) {
                sums[idx] += c.product.abs();
            }
        }
    }
    let mut entries: Vec<(usize, f64)> = sums
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0)
        .map(|(idx, &s)| (idx, s / reports.len() as f64))
        .collect();
    entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    entries
        .into_iter()
        .map(|(idx, mean_abs_product)| InfluenceEntry {
            feature: catalog.name(idx),
            mean_abs_product,
        })
        .collect()
}

/// `day,hour,feature,coefficient,normalized_value,product` rows.
pub fn write_attribution_csv<W: std::io::Write>(
    report: &AttributionReport,
    mut w: W,
) -> Result<()> {
    writeln!(w, "day,hour,feature,coefficient,normalized_value,product")?;
    for c in &report.contributions {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            report.target_day,
            report.hour,
            c.feature.label(),
            c.coefficient,
            c.feature_value_normalized,
            c.product
        )?;
    }
    Ok(())
}

/// `day,hour,family,total` rows, intercept and prediction appended as
/// pseudo-families for a self-contained summary.
pub fn write_family_csv<W: std::io::Write>(report: &AttributionReport, mut w: W) -> Result<()> {
    writeln!(w, "day,hour,family,total")?;
    for (key, total) in &report.family_totals {
        writeln!(
            w,
            "{},{},{},{}",
            report.target_day,
            report.hour,
            key.label(),
            total
        )?;
    }
    writeln!(
        w,
        "{},{},intercept,{}",
        report.target_day, report.hour, report.intercept
    )?;
    writeln!(
        w,
        "{},{},predicted_price,{}",
        report.target_day, report.hour, report.price_prediction
    )?;
    Ok(())
}
