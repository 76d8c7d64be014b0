//! Output plumbing: atomic file writes, run manifests and the SVG
//! scatter renderer.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::{CliError, CliResult};

/// Write-temp-then-rename so readers never observe partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Io(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    dataset_hash: String,
    outputs: Vec<String>,
}

/// Collects the files a command produced and stamps them with hashes of
/// the resolved configuration and the input dataset.
pub struct RunWriter {
    out_dir: PathBuf,
    command: &'static str,
    config_hash: String,
    dataset_hash: String,
    outputs: Vec<String>,
}

impl RunWriter {
    pub fn new(command: &'static str, cfg: &RunConfig, extra: &impl Serialize) -> CliResult<RunWriter> {
        fs::create_dir_all(&cfg.out)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.out.display())))?;
        let config_blob = serde_json::to_vec(&(cfg, extra))
            .map_err(|e| CliError::Io(format!("config hashing failed: {e}")))?;
        let data_bytes = fs::read(&cfg.data)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", cfg.data.display())))?;
        Ok(RunWriter {
            out_dir: cfg.out.clone(),
            command,
            config_hash: sha256_hex(&config_blob),
            dataset_hash: sha256_hex(&data_bytes),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.path(name), bytes)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        write_json_atomic(&self.path(name), value)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Registers a file written outside the writer (e.g. streamed
    /// snapshots) so the manifest still covers it.
    pub fn record(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    /// Writes `manifest.json` covering everything recorded so far.
    pub fn finish(mut self) -> CliResult<()> {
        self.outputs.sort();
        let manifest = Manifest {
            command: self.command,
            config_hash: self.config_hash.clone(),
            dataset_hash: self.dataset_hash.clone(),
            outputs: self.outputs.clone(),
        };
        write_json_atomic(&self.out_dir.join("manifest.json"), &manifest)
    }
}

/// Minimal scatter-plot SVG: points, axes, tick labels.
pub fn scatter_svg(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let (width, height) = (800.0, 600.0);
    let margin = 60.0;
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if points.is_empty() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    let pad = |lo: &mut f64, hi: &mut f64| {
        let span = (*hi - *lo).max(1e-9);
        *lo -= 0.05 * span;
        *hi += 0.05 * span;
    };
    pad(&mut x_min, &mut x_max);
    pad(&mut y_min, &mut y_max);

    let sx = |x: f64| margin + (x - x_min) / (x_max - x_min) * (width - 2.0 * margin);
    let sy = |y: f64| height - margin - (y - y_min) / (y_max - y_min) * (height - 2.0 * margin);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = margin,
        b = height - margin,
        r = width - margin
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = margin,
        b = height - margin
    ));
    // Zero-error guide when visible.
    if y_min < 0.0 && y_max > 0.0 {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n",
            margin,
            width - margin,
            y = sy(0.0)
        ));
    }
    for &(x, y) in points {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"steelblue\" fill-opacity=\"0.6\"/>\n",
            sx(x),
            sy(y)
        ));
    }
    // Tick labels at the extremes.
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{:.1}</text>\n",
        sx(x_min),
        height - margin + 18.0,
        x_min
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{:.1}</text>\n",
        sx(x_max),
        height - margin + 18.0,
        x_max
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{:.1}</text>\n",
        margin - 6.0,
        sy(y_min) + 4.0,
        y_min
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{:.1}</text>\n",
        margin - 6.0,
        sy(y_max) + 4.0,
        y_max
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{x_label}</text>\n",
        width / 2.0,
        height - 15.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 {h})\">{y_label}</text>\n",
        height / 2.0,
        h = height / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}
