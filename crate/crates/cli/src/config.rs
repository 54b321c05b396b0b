//! JSON configuration document shared by all subcommands.
//!
//! The file mirrors the library configuration types: a `params` block
//! (validated exactly like [`HestonParams::new`]) plus one optional section
//! per subcommand. Unknown keys are rejected everywhere; the reference schema
//! ships in `schema/config.schema.json`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use heston_clse::{HestonParams, KnownVols, Scheme};

use crate::commands::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Model parameters; required by simulate, asymptotics and montecarlo.
    pub params: Option<HestonParams>,
    pub simulate: Option<SimulateSection>,
    pub estimate: Option<EstimateSection>,
    pub asymptotics: Option<AsymptoticsSection>,
    pub montecarlo: Option<MontecarloSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Number of unit-spaced increments (the series has n + 1 rows).
    pub n: usize,
    #[serde(default = "default_substeps")]
    pub substeps: u32,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    /// Series CSV produced by the simulate command (or any file in the same
    /// format).
    pub series: PathBuf,
    /// Confidence level for the optional interval block.
    #[serde(default = "default_level")]
    pub level: f64,
    /// Volatility parameters treated as known; when present, plug-in
    /// confidence intervals are attached to the estimate.
    #[serde(default)]
    pub known_vols: Option<KnownVols>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsSection {
    /// Cross-check the closed-form noise constants against the quadrature
    /// oracle and include the residuals in the output.
    #[serde(default = "default_true")]
    pub quadrature_check: bool,
    #[serde(default = "default_quad_tol")]
    pub quadrature_tol: f64,
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        Self {
            quadrature_check: true,
            quadrature_tol: default_quad_tol(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MontecarloSection {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_substeps")]
    pub substeps: u32,
    #[serde(default)]
    pub scheme: Scheme,
    /// Also dump every replicate's estimate as estimates.csv.
    #[serde(default)]
    pub dump_estimates: bool,
}

fn default_substeps() -> u32 {
    64
}

fn default_level() -> f64 {
    0.95
}

fn default_true() -> bool {
    true
}

fn default_quad_tol() -> f64 {
    1e-12
}

pub fn load(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config: FileConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {} is invalid: {e}", path.display())))?;
    if let Some(est) = &config.estimate {
        if !(est.level > 0.0 && est.level < 1.0) {
            return Err(CliError::Config(format!(
                "estimate.level must be inside (0, 1), got {}",
                est.level
            )));
        }
    }
    Ok(config)
}
