//! Subcommand implementations: thin orchestration over the library, plus
//! file I/O with path context on every error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use heston_clse::asymptotics::{AsymptoticsReport, CiError};
use heston_clse::estimate::EstimateReport;
use heston_clse::montecarlo::{
    write_coverage_csv, write_estimates_csv, write_qq_csv, write_rmse_csv,
};
use heston_clse::{
    clse_original, confidence_intervals, run_experiment, simulate_path, ExperimentConfig,
    HestonParams, ObservationSeries, Scheme, SimulationConfig,
};

use crate::config::{AsymptoticsSection, FileConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 2: the configuration (file, sections, values) is unusable.
    #[error("{0}")]
    Config(String),
    /// Exit code 3: a valid configuration failed at runtime.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn require_params(config: &FileConfig) -> Result<&HestonParams, CliError> {
    config
        .params
        .as_ref()
        .ok_or_else(|| CliError::Config("config is missing the 'params' section".into()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Runtime(format!("cannot serialize {}: {e}", path.display())))?;
    out.push(b'\n');
    write_bytes(path, &out)
}

#[derive(Serialize)]
struct SeriesMeta<'a> {
    params: &'a HestonParams,
    n: usize,
    substeps: u32,
    scheme: Scheme,
    seed: u64,
}

pub fn simulate(
    config: &FileConfig,
    output: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let params = require_params(config)?;
    let section = config
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Config("config is missing the 'simulate' section".into()))?;
    let seed = seed_override.unwrap_or(section.seed);
    let sim = SimulationConfig {
        substeps: section.substeps,
        seed,
        scheme: section.scheme,
    };
    let series = simulate_path(params, section.n, &sim)
        .map_err(|e| CliError::Config(format!("simulate section is invalid: {e}")))?;

    let csv_path = output.join("series.csv");
    let file = File::create(&csv_path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", csv_path.display())))?;
    let mut writer = BufWriter::new(file);
    series
        .write_csv(&mut writer)
        .and_then(|_| writer.flush())
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", csv_path.display())))?;

    write_json(
        &output.join("meta.json"),
        &SeriesMeta {
            params,
            n: section.n,
            substeps: section.substeps,
            scheme: section.scheme,
            seed,
        },
    )
}

pub fn estimate(config: &FileConfig, output: &Path) -> Result<(), CliError> {
    let section = config
        .estimate
        .as_ref()
        .ok_or_else(|| CliError::Config("config is missing the 'estimate' section".into()))?;
    let file = File::open(&section.series).map_err(|e| {
        CliError::Runtime(format!(
            "cannot open series {}: {e}",
            section.series.display()
        ))
    })?;
    let series = ObservationSeries::read_csv(file).map_err(|e| {
        CliError::Runtime(format!(
            "series {} is invalid: {e}",
            section.series.display()
        ))
    })?;
    let result =
        clse_original(&series).map_err(|e| CliError::Runtime(format!("estimation failed: {e}")))?;

    let ci = match &section.known_vols {
        // An out-of-image estimate has no original parameters, hence no
        // intervals; everything else is a hard error.
        Some(vols) => match confidence_intervals(&result, vols, section.level) {
            Ok(ci) => Some(ci),
            Err(CiError::MissingOriginal) => None,
            Err(e) => return Err(CliError::Config(format!("confidence intervals: {e}"))),
        },
        None => None,
    };
    write_json(
        &output.join("estimate.json"),
        &EstimateReport::new(&result, ci),
    )
}

pub fn asymptotics(config: &FileConfig, output: &Path) -> Result<(), CliError> {
    let params = require_params(config)?;
    let defaults = AsymptoticsSection::default();
    let section = config.asymptotics.as_ref().unwrap_or(&defaults);
    let tol = section.quadrature_check.then_some(section.quadrature_tol);
    write_json(
        &output.join("asymptotics.json"),
        &AsymptoticsReport::new(params, tol),
    )
}

pub fn montecarlo(
    config: &FileConfig,
    output: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let params = require_params(config)?;
    let section = config
        .montecarlo
        .as_ref()
        .ok_or_else(|| CliError::Config("config is missing the 'montecarlo' section".into()))?;
    let cfg = ExperimentConfig {
        params: *params,
        n_grid: section.n_grid.clone(),
        replicates: section.replicates,
        seed: seed_override.unwrap_or(section.seed),
        level: section.level,
        sim: SimulationConfig {
            substeps: section.substeps,
            seed: 0,
            scheme: section.scheme,
        },
    };
    let out = run_experiment(&cfg)
        .map_err(|e| CliError::Config(format!("montecarlo section is invalid: {e}")))?;

    write_json(&output.join("report.json"), &out.report)?;
    write_csv_with(output.join("rmse_vs_n.csv"), |w| {
        write_rmse_csv(&out.report, w)
    })?;
    write_csv_with(output.join("coverage.csv"), |w| {
        write_coverage_csv(&out.report, w)
    })?;
    write_csv_with(output.join("qq_whitened.csv"), |w| write_qq_csv(&out, w))?;
    if section.dump_estimates {
        write_csv_with(output.join("estimates.csv"), |w| {
            write_estimates_csv(&out.estimate_rows, w)
        })?;
    }
    Ok(())
}

fn write_csv_with<F>(path: PathBuf, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(&path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
    let mut writer = BufWriter::new(file);
    write(&mut writer)
        .and_then(|_| writer.flush())
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
