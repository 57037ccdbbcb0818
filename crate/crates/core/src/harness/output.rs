//! CSV and run-manifest writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::sweep::{sweep, SweepResult};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "method,snr_db,ns,rate_mean,rate_median,rate_ci95,trials,seed,angle_spread_deg,angle_bits";

/// Renders a sweep as CSV. Floats use the shortest representation that
/// round-trips, so equal results give byte-identical files.
pub fn sweep_csv(cfg: &ExperimentConfig, result: &SweepResult) -> String {
    let mut s = String::with_capacity(64 * (result.rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for row in &result.rows {
        let bits = row.point.angle_bits.map(|b| b.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            row.method.name(),
            row.point.snr_db,
            row.ns,
            row.rate.rate_mean,
            row.rate.rate_median,
            row.rate.rate_ci95,
            row.rate.trials,
            cfg.seed,
            row.point.angle_spread_deg,
            bits
        )
        .expect("writing to a String cannot fail");
    }
    s
}

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, outputs: Vec<String>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
            outputs,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        m.config.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub result: SweepResult,
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::Io)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Runs a configured sweep and writes `<name>.csv` and
/// `<name>.manifest.json` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, threads: Option<usize>) -> Result<RunOutput> {
    let result = sweep(cfg, threads)?;
    ensure_dir(out_dir)?;
    let csv = out_dir.join(format!("{}.csv", cfg.name));
    let manifest = out_dir.join(format!("{}.manifest.json", cfg.name));
    write_file(&csv, &sweep_csv(cfg, &result))?;
    let m = Manifest::new(cfg, vec![file_name(&csv)]);
    write_file(&manifest, &(serde_json::to_string_pretty(&m)? + "\n"))?;
    Ok(RunOutput { csv, manifest, result })
}

pub(crate) fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
