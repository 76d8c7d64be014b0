//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS]` line with the checked tolerance. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use lear::attribution;
use lear::diagnostics::{self, EventKind, LabelConfig};
use lear::engine::{self, EngineConfig, LearModelSet};
use lear::features::{FeatureCatalog, FeatureName, EXOG_LAGS, NUM_DUMMIES, PRICE_LAGS};
use lear::lasso::{
    fit_coordinate_descent, kkt_violation, lambda_max, soft_threshold, FitOptions, LassoProblem,
};
use lear::market_data::{impute_missing_days, MarketDataset, SeriesId, HOURS_PER_DAY};
use lear::scaling::ScalingMethod;
use lear::synth::{self, LinearDgp, SpikyDgp};
use lear::ColMatrix;

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Columns orthogonal to each other and to the constant vector, scaled
/// so that `x_jᵀx_j / n = 1`.
fn orthonormal_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> ColMatrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0; n]];
    while cols.len() < p {
        let mut v: Vec<f64> = (0..n).map(|_| randn(rng)).collect();
        for b in &basis {
            let proj = dot(&v, b) / dot(b, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let norm_sq = dot(&v, &v);
        if norm_sq < 1e-6 {
            continue;
        }
        let scale = (n as f64 / norm_sq).sqrt();
        let col: Vec<f64> = v.iter().map(|vi| vi * scale).collect();
        basis.push(col.clone());
        cols.push(col);
    }
    ColMatrix::from_fn(n, p, |i, j| cols[j][i])
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (ColMatrix, Vec<f64>) {
    let factor: Vec<f64> = (0..n).map(|_| randn(rng)).collect();
    let x = ColMatrix::from_fn(n, p, |i, _| randn(rng) + 0.4 * factor[i]);
    let k = p.min(4);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let mut v = 0.5 * randn(rng);
            for j in 0..k {
                v += if j % 2 == 0 { 0.8 } else { -0.5 } * x.get(i, j);
            }
            v
        })
        .collect();
    (x, y)
}

#[test]
fn c01_lasso_closed_form_oracle_on_orthonormal_design() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let n = 64;
    let p = 8;
    let x = orthonormal_design(&mut rng, n, p);
    let y: Vec<f64> = (0..n)
        .map(|i| 1.2 * x.get(i, 1) - 0.9 * x.get(i, 6) + randn(&mut rng))
        .collect();
    let lmax = lambda_max(&x, &y);
    let mut max_gap = 0.0f64;
    for k in 0..20 {
        let lambda = lmax * (0.01f64).powf(k as f64 / 19.0);
        let problem = LassoProblem::new(&x, &y, lambda).unwrap();
        let fit = fit_coordinate_descent(&problem, &FitOptions::default(), None);
        assert!(fit.converged);
        for j in 0..p {
            let closed = soft_threshold(dot(x.col(j), &y) / n as f64, lambda);
            max_gap = max_gap.max((fit.coefficients[j] - closed).abs());
        }
    }
    assert!(max_gap <= 1e-8, "closed-form gap {max_gap:e}");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "[PASS] C1: 64x8 orthonormal oracle, 20 lambdas, max gap {max_gap:.2e} <= 1e-8, {:.3}s < 1s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn c02_kkt_conditions_hold_on_100_random_problems() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let n = rng.gen_range(20..=200);
        let p = rng.gen_range(2..=500);
        let (x, y) = random_problem(&mut rng, n, p);
        let lambda = lambda_max(&x, &y) * rng.gen_range(0.01..0.9);
        let problem = LassoProblem::new(&x, &y, lambda).unwrap();
        let fit = fit_coordinate_descent(&problem, &FitOptions::default(), None);
        assert!(fit.converged, "trial {trial} (n={n}, p={p}) did not converge");
        let violation = kkt_violation(&problem, &fit);
        assert!(
            violation <= 1e-6,
            "trial {trial} (n={n}, p={p}): KKT violation {violation:e}"
        );
        worst = worst.max(violation);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "[PASS] C2: 100 random problems, worst KKT violation {worst:.2e} <= 1e-6, {:.1}s < 30s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn c03_fits_above_lambda_max_are_exactly_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for trial in 0..50 {
        let n = rng.gen_range(15..120);
        let p = rng.gen_range(2..80);
        let (x, y) = random_problem(&mut rng, n, p);
        let lambda = 1.01 * lambda_max(&x, &y);
        let problem = LassoProblem::new(&x, &y, lambda).unwrap();
        let fit = fit_coordinate_descent(&problem, &FitOptions::default(), None);
        assert!(
            fit.coefficients.iter().all(|&b| b == 0.0),
            "trial {trial}: nonzero coefficient above lambda_max"
        );
    }
    println!("[PASS] C3: beta == 0 exactly at 1.01*lambda_max, 50/50 problems");
}

#[test]
fn c04_attribution_additivity_over_a_60_day_backtest() {
    let first = d("2020-01-01");
    let ds = synth::smooth_dataset(404, first, 130);
    let cfg = EngineConfig {
        window_length: 60,
        recalib_every: 5,
        ..EngineConfig::default() // asinh scaling, AIC
    };
    let start = d("2020-03-09");
    let end = start + Days::new(59);
    let mut models: Vec<LearModelSet> = Vec::new();
    let run = engine::rolling_backtest_with(&ds, start, end, &cfg, |m| {
        models.push(m.clone());
        Ok(())
    })
    .unwrap();
    assert_eq!(run.forecasts.len(), 60);

    let mut checked = 0usize;
    let mut worst_additivity = 0.0f64;
    let mut worst_price = 0.0f64;
    for fd in &run.forecasts {
        let model = models
            .iter()
            .find(|m| m.calibrated_for == fd.model_ref)
            .unwrap();
        for hour in 0..HOURS_PER_DAY as u8 {
            let report = attribution::decompose(model, &ds, fd.target_day, hour).unwrap();
            let sum: f64 = report.contributions.iter().map(|c| c.product).sum();
            let additivity = (sum + report.intercept - report.normalized_prediction).abs();
            let price_gap = (report.price_prediction - fd.predicted[hour as usize]).abs();
            assert!(
                additivity <= 1e-9,
                "{} h{hour}: additivity {additivity:e}",
                fd.target_day
            );
            assert!(
                price_gap <= 1e-9,
                "{} h{hour}: price gap {price_gap:e}",
                fd.target_day
            );
            worst_additivity = worst_additivity.max(additivity);
            worst_price = worst_price.max(price_gap);
            checked += 1;
        }
    }
    assert_eq!(checked, 1440);
    println!(
        "[PASS] C4: 1440/1440 hourly attributions additive (worst {worst_additivity:.2e}) and \
         price-consistent (worst {worst_price:.2e}) within 1e-9"
    );
}

#[test]
fn c05_no_leakage_under_future_perturbation() {
    let first = d("2020-01-01");
    let n_days = 90;
    let ds = synth::smooth_dataset(505, first, n_days);
    let cfg = EngineConfig {
        window_length: 30,
        recalib_every: 7,
        ..EngineConfig::default()
    };
    let start = d("2020-02-07");
    let end = start + Days::new(29); // 30-day backtest
    let base = engine::rolling_backtest(&ds, start, end, &cfg).unwrap();
    assert_eq!(base.forecasts.len(), 30);

    let mut rng = ChaCha8Rng::seed_from_u64(506);
    for cut_offset in [14u64, 29u64] {
        let cut = start + Days::new(cut_offset);
        let cut_idx = ds.day_index(cut).unwrap();
        let perturbed: Vec<Vec<f64>> = SeriesId::ALL
            .iter()
            .map(|s| {
                (0..n_days * HOURS_PER_DAY)
                    .map(|i| {
                        let v = ds.value_at(*s, i / HOURS_PER_DAY, (i % HOURS_PER_DAY) as u8);
                        if i / HOURS_PER_DAY > cut_idx {
                            v * rng.gen_range(0.3..3.0) + rng.gen_range(-500.0..500.0)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let ds2 = MarketDataset::from_values(first, perturbed).unwrap();
        let run2 = engine::rolling_backtest(&ds2, start, end, &cfg).unwrap();
        for (fa, fb) in base.forecasts.iter().zip(&run2.forecasts) {
            if fa.target_day > cut {
                continue;
            }
            for h in 0..HOURS_PER_DAY {
                assert_eq!(
                    fa.predicted[h].to_bits(),
                    fb.predicted[h].to_bits(),
                    "forecast {} h{h} changed by data after {cut}",
                    fa.target_day
                );
            }
        }
    }
    println!("[PASS] C5: 30-day backtest bitwise invariant to perturbations after day d (d = start+14, start+29)");
}

#[test]
fn c06_synthetic_dgp_recovery_with_one_year_window() {
    let started = Instant::now();
    let first = d("2018-01-01");
    let dgp = LinearDgp::new(first, 395, 606); // 1.5*wind - 0.8*load_fr + 20 + N(0,2)
    let ds = dgp.generate();
    let cfg = EngineConfig {
        window_length: 365,
        scaling: ScalingMethod::ZScore,
        recalib_every: 7,
        ..EngineConfig::default()
    };
    let start = engine::earliest_feasible_start(&ds, cfg.window_length);
    assert_eq!(start, d("2019-01-08"));

    // Support and coefficient recovery on the first calibration.
    let models = engine::calibrate(&ds, start, &cfg).unwrap();
    let catalog = &models.catalog;
    let mut worst_rel = 0.0f64;
    for hour in 0..HOURS_PER_DAY as u8 {
        let fit = &models.hour_fits[hour as usize];
        for (series, truth) in [
            (SeriesId::WindForecastBE, dgp.wind_coef),
            (SeriesId::LoadForecastFR, dgp.load_fr_coef),
        ] {
            let j = catalog
                .index_of(&FeatureName::Exogenous {
                    series,
                    lag: 0,
                    hour,
                })
                .unwrap();
            let beta = fit.coefficients[j];
            assert!(beta != 0.0, "hour {hour}: {series} not in selected support");
            // Undo the z-scoring to compare against the raw-space truth.
            let raw_equiv = beta * models.scaler.target_scale[hour as usize]
                / models.scaler.feature_scale[j];
            let rel = (raw_equiv - truth).abs() / truth.abs();
            assert!(
                rel <= 0.15,
                "hour {hour} {series}: raw-equivalent {raw_equiv:.4} vs truth {truth} (rel {rel:.3})"
            );
            worst_rel = worst_rel.max(rel);
        }
    }

    // Short rolling backtest: MAE within 2x the noise sd.
    let end = start + Days::new(13);
    let run = engine::rolling_backtest(&ds, start, end, &cfg).unwrap();
    let records = diagnostics::records_from_run(&run);
    let metrics = diagnostics::compute_metrics(&records).unwrap();
    assert!(
        metrics.mae <= 2.0 * dgp.noise_sd,
        "MAE {} exceeds 2x noise sd",
        metrics.mae
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "[PASS] C6: support recovered for all 24 hours, worst coefficient error {:.1}% <= 15%, \
         backtest MAE {:.3} <= {:.1}, {:.0}s < 300s",
        100.0 * worst_rel,
        metrics.mae,
        2.0 * dgp.noise_sd,
        elapsed.as_secs_f64()
    );
}

#[test]
fn c07_spike_failure_mode_reproduces_in_95_of_100_runs() {
    let first = d("2020-01-01");
    let cfg = EngineConfig {
        window_length: 35,
        recalib_every: 10,
        ..EngineConfig::default()
    };
    let label_cfg = LabelConfig::default();
    let start = d("2020-02-12"); // 35 + 7 days after the first day
    let end = start + Days::new(9);

    let mut successes = 0;
    for seed in 0..100u64 {
        let (ds, _) = SpikyDgp::new(first, 60, 7000 + seed).generate();
        let run = engine::rolling_backtest(&ds, start, end, &cfg).unwrap();
        let records = diagnostics::records_from_run(&run);
        let labels = diagnostics::label_records(&ds, &records, &label_cfg).unwrap();
        let report = diagnostics::segment_report(&records, &labels);
        let spike = report.segment(EventKind::Spike);
        let ok = report.spike_mae_exceeds_normal == Some(true)
            && spike.mean_error.map(|b| b > 0.0) == Some(true);
        if ok {
            successes += 1;
        }
    }
    assert!(
        successes >= 95,
        "spike under-prediction reproduced in only {successes}/100 runs"
    );
    println!(
        "[PASS] C7: MAE(spike) > MAE(normal) and positive spike-segment bias in {successes}/100 >= 95 seeded runs"
    );
}

#[test]
fn c08_single_day_deletion_imputes_the_neighbor_mean_exactly() {
    let first = d("2020-03-01");
    let n_days = 30;
    let ds = synth::smooth_dataset(808, first, n_days);
    for deleted in 1..n_days - 1 {
        let gappy: Vec<Vec<f64>> = SeriesId::ALL
            .iter()
            .map(|s| {
                (0..n_days * HOURS_PER_DAY)
                    .map(|i| {
                        if i / HOURS_PER_DAY == deleted {
                            f64::NAN
                        } else {
                            ds.value_at(*s, i / HOURS_PER_DAY, (i % HOURS_PER_DAY) as u8)
                        }
                    })
                    .collect()
            })
            .collect();
        let raw = lear::market_data::RawDataset::from_values(first, gappy);
        let imputed = impute_missing_days(&raw).unwrap();
        for series in SeriesId::ALL {
            for hour in 0..HOURS_PER_DAY as u8 {
                let before = ds.value_at(series, deleted - 1, hour);
                let after = ds.value_at(series, deleted + 1, hour);
                let got = imputed.value_at(series, deleted, hour);
                assert_eq!(
                    got.to_bits(),
                    ((before + after) / 2.0).to_bits(),
                    "day {deleted} {series} h{hour}"
                );
            }
        }
        // Idempotence on the imputed result.
        let again = impute_missing_days(&imputed.to_raw()).unwrap();
        assert_eq!(again.to_raw(), imputed.to_raw());
        assert!(again.imputation_log().is_empty());
    }
    println!(
        "[PASS] C8: every interior-day deletion re-imputes to the exact neighbor mean; imputation idempotent"
    );
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_lear"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "lear {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn file_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn c09_cli_runs_are_bitwise_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synth::smooth_dataset(909, d("2020-01-01"), 60);
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    let data = tmp.path().join("data.csv");
    std::fs::write(&data, buf).unwrap();
    let data = data.to_str().unwrap();

    let backtest = |out: &PathBuf| {
        run_cli(&[
            "backtest",
            "--data",
            data,
            "--out",
            out.to_str().unwrap(),
            "--from",
            "2020-02-07",
            "--to",
            "2020-02-16",
            "--window-days",
            "30",
            "--recalib-every",
            "5",
            "--seed",
            "7",
        ]);
    };
    let bt1 = tmp.path().join("bt1");
    let bt2 = tmp.path().join("bt2");
    backtest(&bt1);
    backtest(&bt2);
    for name in ["forecasts.csv", "metrics.json", "manifest.json"] {
        assert_eq!(
            file_bytes(&bt1.join(name)),
            file_bytes(&bt2.join(name)),
            "{name} differs between identical runs"
        );
    }

    let explain = |out: &PathBuf| {
        run_cli(&[
            "explain",
            "--data",
            data,
            "--out",
            out.to_str().unwrap(),
            "--day",
            "2020-02-10",
            "--window-days",
            "30",
            "--verify",
        ]);
    };
    let ex1 = tmp.path().join("ex1");
    let ex2 = tmp.path().join("ex2");
    explain(&ex1);
    explain(&ex2);
    let mut attribution_files = 0;
    for entry in std::fs::read_dir(&ex1).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_string_lossy();
        if name.ends_with(".csv") {
            attribution_files += 1;
            assert_eq!(
                file_bytes(&ex1.join(name.as_ref())),
                file_bytes(&ex2.join(name.as_ref())),
                "{name} differs between identical runs"
            );
        }
    }
    assert_eq!(attribution_files, 48); // 24 attribution + 24 family files
    println!(
        "[PASS] C9: repeated CLI runs byte-identical (forecasts.csv, metrics.json, 48 attribution CSVs)"
    );
}

#[test]
fn c10_feature_geometry_matches_the_index_oracle() {
    let catalog = FeatureCatalog::standard();
    let derived = HOURS_PER_DAY * PRICE_LAGS.len()
        + HOURS_PER_DAY * SeriesId::EXOGENOUS.len() * EXOG_LAGS.len()
        + NUM_DUMMIES;
    assert_eq!(derived, 463);
    assert_eq!(catalog.len(), derived);

    // Cell values encode their own coordinates so each of the 463
    // positions can be checked by index arithmetic alone.
    let first = d("2020-06-01"); // a Monday
    let n_days = 12;
    let values: Vec<Vec<f64>> = SeriesId::ALL
        .iter()
        .map(|s| {
            (0..n_days * HOURS_PER_DAY)
                .map(|i| {
                    (s.index() * 1_000_000 + (i / HOURS_PER_DAY) * 100 + i % HOURS_PER_DAY) as f64
                })
                .collect()
        })
        .collect();
    let ds = MarketDataset::from_values(first, values).unwrap();
    let target_ordinal = 9usize;
    let target = first + Days::new(target_ordinal as u64); // 2020-06-10, a Wednesday
    let row = catalog.build_row(&ds, target).unwrap();
    assert_eq!(row.values.len(), 463);

    let weekday = 2usize; // Wednesday, Monday = 0
    let price_block = HOURS_PER_DAY * PRICE_LAGS.len();
    let exog_block = HOURS_PER_DAY * EXOG_LAGS.len();
    for (k, &got) in row.values.iter().enumerate() {
        let expected = if k < price_block {
            let lag = PRICE_LAGS[k / HOURS_PER_DAY] as usize;
            ((target_ordinal - lag) * 100 + k % HOURS_PER_DAY) as f64
        } else if k < price_block + SeriesId::EXOGENOUS.len() * exog_block {
            let e = k - price_block;
            let series_idx = 1 + e / exog_block;
            let rem = e % exog_block;
            let lag = EXOG_LAGS[rem / HOURS_PER_DAY] as usize;
            (series_idx * 1_000_000 + (target_ordinal - lag) * 100 + rem % HOURS_PER_DAY) as f64
        } else if k - (price_block + SeriesId::EXOGENOUS.len() * exog_block) == weekday {
            1.0
        } else {
            0.0
        };
        assert_eq!(got, expected, "feature position {k}");
    }
    println!(
        "[PASS] C10: 463-entry feature vector (96 price lags + 360 exogenous + 7 dummies) matches the index-arithmetic oracle at every position"
    );
}
