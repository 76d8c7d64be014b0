//! Per-window normalization of features and targets.
//!
//! Two methods: classic z-scoring, and the default robust variant that
//! centers on the median, scales by the MAD and then applies `asinh`.
//! The asinh step tames price spikes while staying invertible for
//! negative prices, which a log transform is not. Day-of-week dummy
//! columns pass through untouched so their 0/1 semantics survive into
//! attribution.

use serde::{Deserialize, Serialize};

use crate::features::DesignMatrix;
use crate::market_data::HOURS_PER_DAY;
use crate::mat::ColMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingMethod {
    #[serde(rename = "zscore")]
    ZScore,
    #[serde(rename = "asinh")]
    MedianMadAsinh,
}

impl std::str::FromStr for ScalingMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zscore" => Ok(ScalingMethod::ZScore),
            "asinh" => Ok(ScalingMethod::MedianMadAsinh),
            other => Err(format!("unknown scaling method '{other}'")),
        }
    }
}

impl std::fmt::Display for ScalingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScalingMethod::ZScore => "zscore",
            ScalingMethod::MedianMadAsinh => "asinh",
        })
    }
}

/// Location/scale parameters fitted on one calibration window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub method: ScalingMethod,
    pub feature_loc: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub target_loc: Vec<f64>,
    pub target_scale: Vec<f64>,
    /// Columns exempt from scaling (dummies). Not serialized; rebuilt
    /// from the feature catalog when a snapshot is loaded.
    #[serde(skip)]
    passthrough: Vec<bool>,
}

/// Columns whose spread is this small relative to their location are
/// treated as constant and get scale 1; the LASSO zeroes them anyway.
fn coerce_scale(scale: f64, loc: f64) -> f64 {
    if !scale.is_finite() || scale < 1e-9 * loc.abs().max(1.0) {
        1.0
    } else {
        scale
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn median_mad(values: &[f64]) -> (f64, f64) {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = median_of_sorted(&sorted);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (med, median_of_sorted(&dev))
}

fn location_scale(values: &[f64], method: ScalingMethod) -> (f64, f64) {
    let (loc, scale) = match method {
        ScalingMethod::ZScore => mean_sd(values),
        ScalingMethod::MedianMadAsinh => median_mad(values),
    };
    (loc, coerce_scale(scale, loc))
}

/// Fits location/scale per feature column and per delivery hour on the
/// calibration window only.
pub fn fit_scaler(matrix: &DesignMatrix, method: ScalingMethod) -> Result<ScalerParams> {
    if matrix.n_rows() < 2 {
        return Err(Error::TooFewRows(matrix.n_rows()));
    }
    let p = matrix.n_features();
    let mut feature_loc = Vec::with_capacity(p);
    let mut feature_scale = Vec::with_capacity(p);
    let mut passthrough = Vec::with_capacity(p);
    for j in 0..p {
        if matrix.catalog().is_dummy(j) {
            feature_loc.push(0.0);
            feature_scale.push(1.0);
            passthrough.push(true);
            continue;
        }
        let col = matrix.x().col(j);
        let finite: Vec<f64> = col.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Err(Error::DegenerateMatrix(j));
        }
        let (loc, scale) = location_scale(&finite, method);
        feature_loc.push(loc);
        feature_scale.push(scale);
        passthrough.push(false);
    }

    let mut target_loc = Vec::with_capacity(HOURS_PER_DAY);
    let mut target_scale = Vec::with_capacity(HOURS_PER_DAY);
    for hour in 0..HOURS_PER_DAY as u8 {
        let (loc, scale) = location_scale(matrix.targets(hour), method);
        target_loc.push(loc);
        target_scale.push(scale);
    }

    Ok(ScalerParams {
        method,
        feature_loc,
        feature_scale,
        target_loc,
        target_scale,
        passthrough,
    })
}

impl ScalerParams {
    pub fn n_features(&self) -> usize {
        self.feature_loc.len()
    }

    fn forward(&self, z: f64) -> f64 {
        match self.method {
            ScalingMethod::ZScore => z,
            ScalingMethod::MedianMadAsinh => z.asinh(),
        }
    }

    fn backward(&self, v: f64) -> f64 {
        match self.method {
            ScalingMethod::ZScore => v,
            ScalingMethod::MedianMadAsinh => v.sinh(),
        }
    }

    pub fn transform_feature(&self, j: usize, x: f64) -> f64 {
        if self.passthrough[j] {
            x
        } else {
            self.forward((x - self.feature_loc[j]) / self.feature_scale[j])
        }
    }

    pub fn transform_vector(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.n_features() {
            return Err(Error::LengthMismatch {
                expected: self.n_features(),
                got: values.len(),
            });
        }
        Ok(values
            .iter()
            .enumerate()
            .map(|(j, &x)| self.transform_feature(j, x))
            .collect())
    }

    pub fn transform_matrix(&self, x: &ColMatrix) -> Result<ColMatrix> {
        if x.n_cols() != self.n_features() {
            return Err(Error::LengthMismatch {
                expected: self.n_features(),
                got: x.n_cols(),
            });
        }
        let mut out = x.clone();
        for j in 0..x.n_cols() {
            for v in out.col_mut(j) {
                *v = self.transform_feature(j, *v);
            }
        }
        Ok(out)
    }

    pub fn transform_target(&self, hour: u8, y: f64) -> f64 {
        let h = hour as usize;
        self.forward((y - self.target_loc[h]) / self.target_scale[h])
    }

    /// Exact algebraic inverse of [`Self::transform_target`].
    pub fn inverse_transform_target(&self, hour: u8, v: f64) -> f64 {
        let h = hour as usize;
        self.backward(v) * self.target_scale[h] + self.target_loc[h]
    }

    /// Rebuilds the dummy-passthrough mask after deserialization.
    pub fn rebuild_passthrough(&mut self, catalog: &crate::features::FeatureCatalog) -> Result<()> {
        if catalog.len() != self.n_features() {
            return Err(Error::LengthMismatch {
                expected: catalog.len(),
                got: self.n_features(),
            });
        }
        self.passthrough = (0..catalog.len()).map(|j| catalog.is_dummy(j)).collect();
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn identity(n_features: usize, method: ScalingMethod) -> ScalerParams {
        ScalerParams {
            method,
            feature_loc: vec![0.0; n_features],
            feature_scale: vec![1.0; n_features],
            target_loc: vec![0.0; HOURS_PER_DAY],
            target_scale: vec![1.0; HOURS_PER_DAY],
            passthrough: vec![true; n_features],
        }
    }
}
