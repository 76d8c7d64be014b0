//! The four subcommand implementations.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use chrono::NaiveDate;
use lear::attribution;
use lear::diagnostics::{self, ErrorRecord};
use lear::engine::{self, LearModelSet, ModelSnapshot};
use lear::market_data::{self, CsvSchema, MarketDataset, ValidationReport};
use serde::Serialize;

use crate::config::{self, Overrides};
use crate::output::{scatter_svg, RunWriter};
use crate::{BacktestArgs, CliError, CliResult, ExplainArgs, IngestArgs, ReportArgs};

fn open(path: &Path) -> CliResult<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| {
        CliError::Io(format!("cannot open {}: {e}", path.display()))
    })?))
}

/// Parses and imputes a data file into a ready-to-use dataset.
fn load_dataset(path: &Path, schema: &CsvSchema, lenient: bool) -> CliResult<(MarketDataset, Vec<String>)> {
    let outcome = market_data::parse_csv(open(path)?, schema, lenient)?;
    let dataset = market_data::impute_missing_days(&outcome.dataset)?;
    Ok((dataset, outcome.warnings))
}

#[derive(Serialize)]
struct IngestReport {
    validation: ValidationReport,
    imputed_days: Vec<(NaiveDate, String)>,
    warnings: Vec<String>,
}

pub fn ingest(args: IngestArgs) -> CliResult<()> {
    let cfg = config::resolve(
        &args.common,
        Overrides {
            lenient: if args.lenient { Some(true) } else { None },
            ..Overrides::default()
        },
    )?;
    let schema = if args.wide {
        CsvSchema::wide_default()
    } else {
        CsvSchema::Long
    };
    let (dataset, warnings) = load_dataset(&cfg.data, &schema, cfg.lenient)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let validation = dataset.validate();
    if !validation.is_ok() {
        return Err(CliError::Validation(format!(
            "imputed dataset still fails validation: {} gaps, {} non-finite cells",
            validation.contiguity_gaps.len(),
            validation.non_finite.len()
        )));
    }

    let mut writer = RunWriter::new("ingest", &cfg, &args.wide)?;
    let mut canonical = Vec::new();
    dataset.write_csv(&mut canonical)?;
    writer.write("canonical.csv", &canonical)?;
    let report = IngestReport {
        validation,
        imputed_days: dataset
            .imputation_log()
            .iter()
            .map(|&(date, series)| (date, series.name().to_string()))
            .collect(),
        warnings,
    };
    writer.write_json("validation.json", &report)?;
    writer.finish()?;
    println!(
        "ingested {} .. {} ({} days, {} imputed day-series)",
        dataset.first_day(),
        dataset.last_day(),
        dataset.n_days(),
        report.imputed_days.len()
    );
    Ok(())
}

pub fn backtest(args: BacktestArgs) -> CliResult<()> {
    let cfg = config::resolve(
        &args.common,
        Overrides {
            from: args.from,
            to: args.to,
            window_days: args.window_days,
            recalib_every: args.recalib_every,
            scaling: args.scaling.clone(),
            criterion: args.criterion.clone(),
            ..Overrides::default()
        },
    )?;
    let (dataset, _) = load_dataset(&cfg.data, &CsvSchema::Long, false)?;
    let engine_cfg = cfg.engine_config();

    let earliest = engine::earliest_feasible_start(&dataset, engine_cfg.window_length);
    let start = cfg.from.unwrap_or(earliest);
    let end = cfg.to.unwrap_or_else(|| dataset.last_day());
    if start > end {
        return Err(CliError::Validation(format!(
            "empty range: {start} is after {end}"
        )));
    }
    if start < earliest || end > dataset.last_day() {
        return Err(CliError::Validation(format!(
            "range {start}..{end} is outside coverage; earliest feasible start is {earliest}, last day is {}",
            dataset.last_day()
        )));
    }

    let mut writer = RunWriter::new("backtest", &cfg, &args.snapshots)?;
    if args.snapshots {
        std::fs::create_dir_all(writer.path("snapshots"))
            .map_err(|e| CliError::Io(format!("cannot create snapshots dir: {e}")))?;
    }
    let mut snapshot_files: Vec<String> = Vec::new();
    let run = {
        let snapshot_files = &mut snapshot_files;
        let writer = &writer;
        engine::rolling_backtest_with(&dataset, start, end, &engine_cfg, move |models| {
            if !args.snapshots {
                return Ok(());
            }
            let name = format!("snapshots/snapshot_{}.json", models.calibrated_for);
            let mut bytes = serde_json::to_vec_pretty(&ModelSnapshot::from_model(models))
                .expect("snapshot serializes");
            bytes.push(b'\n');
            std::fs::write(writer.path(&name), &bytes)?;
            snapshot_files.push(name);
            Ok(())
        })?
    };
    for name in snapshot_files {
        writer.record(&name);
    }

    for w in &run.warnings {
        eprintln!("warning: {w}");
    }

    let mut forecasts = Vec::new();
    engine::write_forecasts_csv(&run.forecasts, &mut forecasts)?;
    writer.write("forecasts.csv", &forecasts)?;

    let records = diagnostics::records_from_run(&run);
    let metrics = diagnostics::compute_metrics(&records)?;
    writer.write_json("metrics.json", &metrics)?;
    writer.finish()?;
    println!(
        "backtest {start}..{end}: {} forecast days, {} calibrations, MAE {:.4}",
        run.forecasts.len(),
        run.calibrations,
        metrics.mae
    );
    Ok(())
}

pub fn explain(args: ExplainArgs) -> CliResult<()> {
    let cfg = config::resolve(
        &args.common,
        Overrides {
            window_days: args.window_days,
            scaling: args.scaling.clone(),
            criterion: args.criterion.clone(),
            ..Overrides::default()
        },
    )?;
    let (dataset, _) = load_dataset(&cfg.data, &CsvSchema::Long, false)?;
    if !dataset.covers(args.day) {
        return Err(CliError::Validation(format!(
            "day {} is outside dataset coverage {}..{}",
            args.day,
            dataset.first_day(),
            dataset.last_day()
        )));
    }

    let models: LearModelSet = match &args.snapshot {
        Some(path) => {
            let snap: ModelSnapshot = serde_json::from_reader(open(path)?)
                .map_err(|e| CliError::Validation(format!("bad snapshot {}: {e}", path.display())))?;
            snap.into_model()?
        }
        None => engine::calibrate(&dataset, args.day, &cfg.engine_config())?,
    };

    let hours: Vec<u8> = match args.hour {
        Some(h) => vec![h],
        None => (0..24).collect(),
    };

    let extra = (args.day, args.hour, args.dense, args.snapshot.is_some());
    let mut writer = RunWriter::new("explain", &cfg, &extra)?;
    let forecast = engine::predict_with(&models, &dataset, args.day)?;

    for &hour in &hours {
        let report = if args.dense {
            attribution::decompose_dense(&models, &dataset, args.day, hour)?
        } else {
            attribution::decompose(&models, &dataset, args.day, hour)?
        };

        if args.verify {
            let sum: f64 = report.contributions.iter().map(|c| c.product).sum();
            let additivity = (sum + report.intercept - report.normalized_prediction).abs();
            let price_gap = (report.price_prediction - forecast.predicted[hour as usize]).abs();
            if additivity > 1e-9 || price_gap > 1e-9 {
                return Err(CliError::Invariant(format!(
                    "attribution identity violated at {} h{hour}: additivity residual {additivity:e}, price gap {price_gap:e}",
                    args.day
                )));
            }
        }

        let mut buf = Vec::new();
        attribution::write_attribution_csv(&report, &mut buf)?;
        writer.write(&format!("attribution_{}_h{hour:02}.csv", args.day), &buf)?;
        let mut buf = Vec::new();
        attribution::write_family_csv(&report, &mut buf)?;
        writer.write(&format!("family_{}_h{hour:02}.csv", args.day), &buf)?;
    }
    writer.finish()?;
    println!(
        "explained {} ({} hour{})",
        args.day,
        hours.len(),
        if hours.len() == 1 { "" } else { "s" }
    );
    Ok(())
}

pub fn report(args: ReportArgs) -> CliResult<()> {
    let cfg = config::resolve(
        &args.common,
        Overrides {
            spike_sigma: args.spike_sigma,
            spike_window_days: args.spike_window_days,
            low_quantile: args.low_quantile,
            ..Overrides::default()
        },
    )?;
    let rows = engine::read_forecasts_csv(open(&args.forecasts)?)?;
    let records: Vec<ErrorRecord> = diagnostics::records_from_rows(&rows);
    if records.is_empty() {
        return Err(CliError::Io(format!(
            "no usable forecast rows in {}",
            args.forecasts.display()
        )));
    }
    let (dataset, _) = load_dataset(&cfg.data, &CsvSchema::Long, false)?;
    let labels = diagnostics::label_records(&dataset, &records, &cfg.label_config())?;
    let segments = diagnostics::segment_report(&records, &labels);
    let metrics = diagnostics::compute_metrics(&records)?;

    let extra = args.forecasts.display().to_string();
    let mut writer = RunWriter::new("report", &cfg, &extra)?;
    let mut buf = Vec::new();
    diagnostics::write_error_price_csv(&records, &mut buf)?;
    writer.write("error_vs_price.csv", &buf)?;
    writer.write_json("segments.json", &segments)?;
    writer.write_json("metrics.json", &metrics)?;
    if args.svg {
        let svg = scatter_svg(
            &diagnostics::error_price_points(&records),
            "actual price (EUR/MWh)",
            "error = actual - predicted (EUR/MWh)",
        );
        writer.write("error_vs_price.svg", svg.as_bytes())?;
    }
    writer.finish()?;
    println!(
        "report over {} hours: MAE {:.4}, spike hours {}, negative hours {}",
        segments.total,
        metrics.mae,
        segments.segment(diagnostics::EventKind::Spike).count,
        segments
            .segment(diagnostics::EventKind::NegativePrice)
            .count
    );
    Ok(())
}
