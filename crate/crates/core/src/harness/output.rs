use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, OutputFormat, OutputSpec, SweepSpec};
use super::run::RunOutput;
use super::svg::render_svg;
use super::HarnessError;
use crate::metrics::MetricReport;

/// `runs.csv` header, in column order.
pub const CSV_COLUMNS: [&str; 27] = [
    "experiment",
    "variant",
    "fingerprint",
    "master_seed",
    "sample",
    "sample_seed",
    "field",
    "straightened",
    "inversion",
    "strategy",
    "guidance",
    "w",
    "alpha",
    "mask",
    "mask_mode",
    "hook_scale",
    "n_steps",
    "k_start",
    "mse",
    "psnr",
    "consistency",
    "alignment",
    "alignment_source",
    "roundtrip",
    "nfe",
    "nfe_expected",
    "guidance_norms",
];

/// One result line: a (config, seed, sample) triple.
///
/// `roundtrip` is the Euclidean distance between output and input,
/// `alignment_source` the alignment of the unedited input, and
/// `guidance_norms` the per-step applied guidance norms joined by `;`.
/// An infinite `psnr` (identical latents) is written `inf` in CSV and
/// `null` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRow {
    pub experiment: String,
    pub variant: String,
    pub fingerprint: String,
    pub master_seed: u64,
    pub sample: usize,
    pub sample_seed: u64,
    pub field: String,
    pub straightened: bool,
    pub inversion: String,
    pub strategy: String,
    pub guidance: String,
    pub w: f64,
    pub alpha: f64,
    pub mask: bool,
    pub mask_mode: String,
    pub hook_scale: f64,
    pub n_steps: usize,
    pub k_start: usize,
    pub mse: f64,
    pub psnr: f64,
    pub consistency: f64,
    pub alignment: f64,
    pub alignment_source: f64,
    pub roundtrip: f64,
    pub nfe: u64,
    pub nfe_expected: u64,
    pub guidance_norms: String,
}

impl RunRow {
    pub fn metrics(&self) -> MetricReport {
        MetricReport {
            mse: self.mse,
            psnr: self.psnr,
            consistency: self.consistency,
            alignment: self.alignment,
            roundtrip: self.roundtrip,
            nfe: self.nfe,
        }
    }
}

/// Wall time of one row, written to `timings.csv` only.
#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub fingerprint: String,
    pub sample: usize,
    pub wall_ms: f64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a hash of the canonical JSON form of the run-relevant part of the
/// config (output location and sweep list excluded), as 16 hex digits.
pub fn fingerprint(cfg: &ExperimentConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.output = OutputSpec::default();
    canonical.sweep = SweepSpec::default();
    let text = serde_json::to_string(&canonical).expect("config serializes");
    let hash = text
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME));
    format!("{hash:016x}")
}

fn out_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Output(e.to_string())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: Option<&[&str]>) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_path(path)
        .map_err(out_err)?;
    if let Some(h) = header {
        w.write_record(h).map_err(out_err)?;
    }
    for row in rows {
        w.serialize(row).map_err(out_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `runs.csv` or `runs.json`, `timings.csv`, `summary.json` when the
/// experiment produced summaries, and one `traj_<name>.svg` per figure when
/// `svg` is set. Returns the written paths.
pub fn write_output(
    dir: &Path,
    format: OutputFormat,
    svg: bool,
    out: &RunOutput,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let runs = match format {
        OutputFormat::Csv => {
            let p = dir.join("runs.csv");
            write_csv(&p, &out.rows, Some(&CSV_COLUMNS))?;
            p
        }
        OutputFormat::Json => {
            let p = dir.join("runs.json");
            let mut text = serde_json::to_string_pretty(&out.rows).map_err(out_err)?;
            text.push('\n');
            fs::write(&p, text)?;
            p
        }
    };
    written.push(runs);

    let timings = dir.join("timings.csv");
    write_csv(&timings, &out.timings, Some(&["fingerprint", "sample", "wall_ms"]))?;
    written.push(timings);

    if !out.summaries.is_empty() || !out.checks.is_empty() {
        let p = dir.join("summary.json");
        let body = serde_json::json!({ "variants": out.summaries, "checks": out.checks });
        let mut text = serde_json::to_string_pretty(&body).map_err(out_err)?;
        text.push('\n');
        fs::write(&p, text)?;
        written.push(p);
    }

    if svg {
        for (name, figure) in &out.figures {
            let p = dir.join(format!("traj_{name}.svg"));
            fs::write(&p, render_svg(figure))?;
            written.push(p);
        }
    }
    Ok(written)
}
