//! Replicated simulate-estimate experiments.
//!
//! For each sample size in a grid, `replicates` independent paths are
//! simulated and fit; the aggregated report carries bias/RMSE, the empirical
//! covariance of `sqrt(n) (theta_hat - theta)` for both parameter layers,
//! confidence-interval coverage, out-of-image counts, and normality
//! statistics of the whitened errors. Whitening multiplies the error vectors
//! by `(J E J^T)^{-1/2}` evaluated at the true parameters, so under the limit
//! theorem the whitened sample is standard normal and the squared norms are
//! chi-squared with 4 degrees of freedom.
//!
//! Replicates run in parallel; every replicate draws from its own stream
//! derived from `(seed, grid index, replicate index)` and results are
//! aggregated in replicate order with compensated sums, so the report is a
//! deterministic function of the configuration no matter how work is
//! scheduled.

use std::io::Write;

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::asymptotics::{confidence_intervals, covariance_original, KnownVols};
use crate::estimate::clse_original;
use crate::model::{DriftParams, HestonParams, TransformedParams};
use crate::numeric::KahanSum;
use crate::simulate::{derive_seed, simulate_path, SimulationConfig};
use crate::stats::{chi_squared4_cdf, ks_pvalue, ks_statistic, normal_cdf, normal_quantile};

/// Configuration of one replicated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: HestonParams,
    /// Sample sizes, strictly increasing, each at least 2.
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    /// Master seed; per-replicate streams are derived from it.
    pub seed: u64,
    /// Nominal confidence level for coverage bookkeeping.
    pub level: f64,
    /// Scheme and substep resolution; the embedded seed is ignored in favor
    /// of derived per-replicate seeds.
    pub sim: SimulationConfig,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("n_grid must be nonempty, strictly increasing, with every n >= 2")]
    InvalidGrid,
    #[error("replicates must be at least 1")]
    NoReplicates,
    #[error("confidence level must be inside (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("substeps must be at least 1")]
    ZeroSubsteps,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), ExperimentError> {
        let grid_ok = !self.n_grid.is_empty()
            && self.n_grid.windows(2).all(|w| w[0] < w[1])
            && self.n_grid.iter().all(|&n| n >= 2);
        if !grid_ok {
            return Err(ExperimentError::InvalidGrid);
        }
        if self.replicates == 0 {
            return Err(ExperimentError::NoReplicates);
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(ExperimentError::InvalidLevel(self.level));
        }
        if self.sim.substeps == 0 {
            return Err(ExperimentError::ZeroSubsteps);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum WhitenError {
    #[error(
        "covariance is near singular: min eigenvalue {min_eigenvalue} below 1e-14 * trace = {threshold}"
    )]
    NearSingularCovariance { min_eigenvalue: f64, threshold: f64 },
}

/// Inverse symmetric square root of a positive definite matrix via
/// eigendecomposition. Eigenvalues below `1e-14 * trace` signal a
/// near-singular input instead of being clipped silently.
pub fn inverse_sqrt(cov: &Matrix4<f64>) -> Result<Matrix4<f64>, WhitenError> {
    let sym = 0.5 * (cov + cov.transpose());
    let threshold = 1e-14 * sym.trace();
    let eig = sym.symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.min();
    if min_eigenvalue < threshold {
        return Err(WhitenError::NearSingularCovariance {
            min_eigenvalue,
            threshold,
        });
    }
    let mut inv_sqrt_diag = Matrix4::zeros();
    for i in 0..4 {
        inv_sqrt_diag[(i, i)] = 1.0 / eig.eigenvalues[i].sqrt();
    }
    Ok(eig.eigenvectors * inv_sqrt_diag * eig.eigenvectors.transpose())
}

/// Multiply each error vector by `cov^{-1/2}`.
pub fn whiten_errors(
    errors: &[[f64; 4]],
    cov: &Matrix4<f64>,
) -> Result<Vec<[f64; 4]>, WhitenError> {
    let w = inverse_sqrt(cov)?;
    Ok(errors
        .iter()
        .map(|e| {
            let v = w * Vector4::from_column_slice(e);
            [v[0], v[1], v[2], v[3]]
        })
        .collect())
}

/// One replicate's estimate, flattened for the per-replicate CSV dump.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub n: usize,
    pub replicate: usize,
    pub c: f64,
    pub d: f64,
    pub gamma: f64,
    pub delta: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub out_of_image: bool,
}

/// Bias, RMSE and scaled empirical covariance for one parameter layer.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LayerStats {
    /// Replicates entering the statistics (fitted, and in-image for the
    /// original layer).
    pub samples: usize,
    pub bias: [f64; 4],
    pub rmse: [f64; 4],
    /// Empirical covariance of `sqrt(n) (theta_hat - theta)`.
    pub scaled_cov: [[f64; 4]; 4],
}

/// Goodness-of-fit summaries of the whitened original-layer errors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalityStats {
    pub component_mean: [f64; 4],
    pub component_var: [f64; 4],
    /// One-sample KS distance of each whitened component against N(0, 1).
    pub component_ks: [f64; 4],
    pub component_p: [f64; 4],
    /// KS distance of the squared Mahalanobis norms against chi-squared(4).
    pub mahalanobis_ks: f64,
    pub mahalanobis_p: f64,
}

/// Aggregates for a single sample size.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub n: usize,
    pub attempted: usize,
    pub failed: usize,
    pub out_of_image: usize,
    pub transformed: LayerStats,
    pub original: LayerStats,
    /// Empirical coverage of the nominal-level plug-in intervals, per
    /// parameter `(a, b, alpha, beta)`, over in-image replicates.
    pub coverage: [f64; 4],
    /// `None` when whitening is impossible (degenerate limit covariance) or
    /// no in-image replicates exist.
    pub normality: Option<NormalityStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub replicates: usize,
    pub level: f64,
    pub truth_transformed: [f64; 4],
    pub truth_original: [f64; 4],
    pub runs: Vec<RunReport>,
}

/// Report plus the raw per-replicate material the CLI can dump.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub estimate_rows: Vec<EstimateRow>,
    /// Whitened `sqrt(n) (theta_hat - theta)` vectors per sample size.
    pub whitened: Vec<(usize, Vec<[f64; 4]>)>,
}

enum Outcome {
    Fitted {
        transformed: TransformedParams,
        original: Option<DriftParams>,
        covered: Option<[bool; 4]>,
    },
    Failed,
}

/// Run the experiment described by `cfg`.
///
/// Per-replicate simulator or estimator failures are recorded in the `failed`
/// counter rather than aborting the run. Out-of-image replicates contribute
/// to the transformed-layer statistics only.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    cfg.validate()?;
    let truth_t = cfg.params.transformed();
    let truth_o = cfg.params.drift();
    let vols = KnownVols {
        sigma1: cfg.params.sigma1,
        sigma2: cfg.params.sigma2,
        rho: cfg.params.rho,
    };
    // In degenerate corners (joint volatilities near zero) the limit
    // covariance loses rank and whitening is impossible; the experiment still
    // runs, with the normality block absent.
    let whitener = inverse_sqrt(&covariance_original(&cfg.params).sandwich).ok();

    let mut runs = Vec::with_capacity(cfg.n_grid.len());
    let mut estimate_rows = Vec::new();
    let mut whitened_per_n = Vec::new();

    for (n_idx, &n) in cfg.n_grid.iter().enumerate() {
        let outcomes: Vec<Outcome> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let stream = ((n_idx as u64) << 32) | rep as u64;
                let sim = cfg.sim.with_seed(derive_seed(cfg.seed, stream));
                let obs = match simulate_path(&cfg.params, n, &sim) {
                    Ok(obs) => obs,
                    Err(_) => return Outcome::Failed,
                };
                match clse_original(&obs) {
                    Ok(result) => {
                        let covered = result.original.map(|_| {
                            confidence_intervals(&result, &vols, cfg.level)
                                .map(|ci| ci.covers(&truth_o.as_array()))
                                .unwrap_or([false; 4])
                        });
                        Outcome::Fitted {
                            transformed: result.transformed,
                            original: result.original,
                            covered,
                        }
                    }
                    Err(_) => Outcome::Failed,
                }
            })
            .collect();

        let mut failed = 0usize;
        let mut t_errors: Vec<[f64; 4]> = Vec::new();
        let mut o_errors: Vec<[f64; 4]> = Vec::new();
        let mut covered_counts = [0usize; 4];
        let mut in_image = 0usize;
        for (rep, outcome) in outcomes.iter().enumerate() {
            match outcome {
                Outcome::Failed => failed += 1,
                Outcome::Fitted {
                    transformed,
                    original,
                    covered,
                } => {
                    let te = transformed.as_array();
                    let tt = truth_t.as_array();
                    t_errors.push(std::array::from_fn(|k| te[k] - tt[k]));
                    if let Some(orig) = original {
                        let oe = orig.as_array();
                        let ot = truth_o.as_array();
                        o_errors.push(std::array::from_fn(|k| oe[k] - ot[k]));
                        in_image += 1;
                        if let Some(cov) = covered {
                            for k in 0..4 {
                                if cov[k] {
                                    covered_counts[k] += 1;
                                }
                            }
                        }
                    }
                    estimate_rows.push(EstimateRow {
                        n,
                        replicate: rep,
                        c: transformed.c,
                        d: transformed.d,
                        gamma: transformed.gamma,
                        delta: transformed.delta,
                        a: original.map(|o| o.a),
                        b: original.map(|o| o.b),
                        alpha: original.map(|o| o.alpha),
                        beta: original.map(|o| o.beta),
                        out_of_image: original.is_none(),
                    });
                }
            }
        }

        let fitted = cfg.replicates - failed;
        let out_of_image = fitted - in_image;
        let sqrt_n = (n as f64).sqrt();
        let whitened: Vec<[f64; 4]> = match &whitener {
            Some(w_mat) => o_errors
                .iter()
                .map(|e| {
                    let w = w_mat * (Vector4::from_column_slice(e) * sqrt_n);
                    [w[0], w[1], w[2], w[3]]
                })
                .collect(),
            None => Vec::new(),
        };

        let coverage = std::array::from_fn(|k| {
            if in_image == 0 {
                0.0
            } else {
                covered_counts[k] as f64 / in_image as f64
            }
        });

        runs.push(RunReport {
            n,
            attempted: cfg.replicates,
            failed,
            out_of_image,
            transformed: layer_stats(&t_errors, n),
            original: layer_stats(&o_errors, n),
            coverage,
            normality: (whitener.is_some() && !whitened.is_empty())
                .then(|| normality_stats(&whitened)),
        });
        whitened_per_n.push((n, whitened));
    }

    Ok(ExperimentOutput {
        report: ExperimentReport {
            seed: cfg.seed,
            replicates: cfg.replicates,
            level: cfg.level,
            truth_transformed: truth_t.as_array(),
            truth_original: truth_o.as_array(),
            runs,
        },
        estimate_rows,
        whitened: whitened_per_n,
    })
}

fn layer_stats(errors: &[[f64; 4]], n: usize) -> LayerStats {
    let m = errors.len();
    if m == 0 {
        return LayerStats {
            samples: 0,
            bias: [0.0; 4],
            rmse: [0.0; 4],
            scaled_cov: [[0.0; 4]; 4],
        };
    }
    let mf = m as f64;
    let bias: [f64; 4] =
        std::array::from_fn(|k| errors.iter().map(|e| e[k]).collect::<KahanSum>().value() / mf);
    let rmse: [f64; 4] = std::array::from_fn(|k| {
        (errors
            .iter()
            .map(|e| e[k] * e[k])
            .collect::<KahanSum>()
            .value()
            / mf)
            .sqrt()
    });
    let mut scaled_cov = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in i..4 {
            let cov = errors
                .iter()
                .map(|e| (e[i] - bias[i]) * (e[j] - bias[j]))
                .collect::<KahanSum>()
                .value()
                / mf
                * n as f64;
            scaled_cov[i][j] = cov;
            scaled_cov[j][i] = cov;
        }
    }
    LayerStats {
        samples: m,
        bias,
        rmse,
        scaled_cov,
    }
}

fn normality_stats(whitened: &[[f64; 4]]) -> NormalityStats {
    let m = whitened.len();
    let mf = m as f64;
    let component_mean: [f64; 4] =
        std::array::from_fn(|k| whitened.iter().map(|w| w[k]).collect::<KahanSum>().value() / mf);
    let component_var: [f64; 4] = std::array::from_fn(|k| {
        whitened
            .iter()
            .map(|w| (w[k] - component_mean[k]).powi(2))
            .collect::<KahanSum>()
            .value()
            / mf
    });
    let mut component_ks = [0.0; 4];
    let mut component_p = [0.0; 4];
    for k in 0..4 {
        let sample: Vec<f64> = whitened.iter().map(|w| w[k]).collect();
        component_ks[k] = ks_statistic(&sample, normal_cdf);
        component_p[k] = ks_pvalue(component_ks[k], m);
    }
    let mahal: Vec<f64> = whitened
        .iter()
        .map(|w| w.iter().map(|v| v * v).sum())
        .collect();
    let mahalanobis_ks = ks_statistic(&mahal, chi_squared4_cdf);
    let mahalanobis_p = ks_pvalue(mahalanobis_ks, m);
    NormalityStats {
        component_mean,
        component_var,
        component_ks,
        component_p,
        mahalanobis_ks,
        mahalanobis_p,
    }
}

const ORIGINAL_NAMES: [&str; 4] = ["a", "b", "alpha", "beta"];
const TRANSFORMED_NAMES: [&str; 4] = ["c", "d", "gamma", "delta"];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Per-replicate estimates as CSV:
/// `n,replicate,c,d,gamma,delta,a,b,alpha,beta,out_of_image`.
pub fn write_estimates_csv<W: Write>(rows: &[EstimateRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "n,replicate,c,d,gamma,delta,a,b,alpha,beta,out_of_image")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{},{}",
            r.n,
            r.replicate,
            r.c,
            r.d,
            r.gamma,
            r.delta,
            fmt_opt(r.a),
            fmt_opt(r.b),
            fmt_opt(r.alpha),
            fmt_opt(r.beta),
            r.out_of_image
        )?;
    }
    Ok(())
}

/// Bias and RMSE per sample size as CSV: `n,layer,parameter,bias,rmse`.
pub fn write_rmse_csv<W: Write>(report: &ExperimentReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "n,layer,parameter,bias,rmse")?;
    for run in &report.runs {
        for (k, name) in TRANSFORMED_NAMES.iter().enumerate() {
            writeln!(
                w,
                "{},transformed,{},{:.16e},{:.16e}",
                run.n, name, run.transformed.bias[k], run.transformed.rmse[k]
            )?;
        }
        for (k, name) in ORIGINAL_NAMES.iter().enumerate() {
            writeln!(
                w,
                "{},original,{},{:.16e},{:.16e}",
                run.n, name, run.original.bias[k], run.original.rmse[k]
            )?;
        }
    }
    Ok(())
}

/// Interval coverage per sample size as CSV: `n,parameter,nominal,coverage`.
pub fn write_coverage_csv<W: Write>(report: &ExperimentReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "n,parameter,nominal,coverage")?;
    for run in &report.runs {
        for (k, name) in ORIGINAL_NAMES.iter().enumerate() {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e}",
                run.n, name, report.level, run.coverage[k]
            )?;
        }
    }
    Ok(())
}

/// Normal QQ data of the whitened errors as CSV:
/// `n,component,theoretical,empirical`.
pub fn write_qq_csv<W: Write>(output: &ExperimentOutput, mut w: W) -> std::io::Result<()> {
    writeln!(w, "n,component,theoretical,empirical")?;
    for (n, vectors) in &output.whitened {
        let m = vectors.len();
        if m == 0 {
            continue;
        }
        for (k, name) in ORIGINAL_NAMES.iter().enumerate() {
            let mut sample: Vec<f64> = vectors.iter().map(|v| v[k]).collect();
            sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (i, value) in sample.iter().enumerate() {
                let q = normal_quantile((i as f64 + 0.5) / m as f64);
                writeln!(w, "{n},{name},{q:.16e},{value:.16e}")?;
            }
        }
    }
    Ok(())
}
