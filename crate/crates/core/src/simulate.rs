//! Path simulation for the subcritical Heston model.
//!
//! Observations are taken at integer times `0, 1, ..., n`. Each unit interval
//! is subdivided into `substeps` internal steps. Two schemes are available:
//!
//! * [`Scheme::ExactCir`] (default): the variance `Y` advances by sampling the
//!   exact CIR transition law, a scaled noncentral chi-square with
//!   `4 a / sigma1^2` degrees of freedom. The log-price `X` then advances per
//!   substep using the identity
//!   `sigma1 int sqrt(Y) dW = dY - a dt + b int Y du`
//!   for the `W`-correlated part, the trapezoid rule for `int Y du`, and an
//!   independent Gaussian with conditional variance
//!   `(1 - rho^2) sigma2^2 int Y du` for the `B` part. `Y` at integer times is
//!   exact for any number of substeps; only the `X` integral carries an
//!   `O(h^2)` discretization bias.
//! * [`Scheme::EulerFullTruncation`]: full-truncation Euler on both
//!   coordinates; the internal variance state may go negative but only its
//!   positive part enters drift and diffusion, and emitted observations are
//!   clamped at zero.
//!
//! All randomness is drawn from a ChaCha8 stream seeded from the
//! configuration, so a `(params, n, config)` triple reproduces the same series
//! bit for bit. Use [`derive_seed`] to spawn distinct streams (one per path)
//! from a master seed.

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::HestonParams;

/// Variance discretization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ExactCir,
    EulerFullTruncation,
}

/// Simulation knobs: internal grid resolution, RNG seed, scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Internal grid points per unit observation interval.
    pub substeps: u32,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            substeps: 64,
            seed: 0,
            scheme: Scheme::ExactCir,
        }
    }
}

impl SimulationConfig {
    /// Same configuration with another seed; convenient for spawning
    /// replicate streams.
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("substeps must be at least 1")]
    ZeroSubsteps,
    #[error("path length n must be at least 2, got {n}")]
    PathTooShort { n: usize },
}

/// Unit-spaced discrete observations `(Y_i, X_i)`, `i = 0..=n`.
///
/// Invariants: both columns have equal length `n + 1 >= 3`, every `Y_i` is
/// finite and nonnegative, every `X_i` finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    y: Vec<f64>,
    x: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series columns differ in length: y has {y_len} rows, x has {x_len}")]
    LengthMismatch { y_len: usize, x_len: usize },
    #[error("series needs at least 3 rows (n >= 2), got {rows}")]
    TooShort { rows: usize },
    #[error("y[{index}] = {value} must be finite and nonnegative")]
    InvalidY { index: usize, value: f64 },
    #[error("x[{index}] = {value} must be finite")]
    InvalidX { index: usize, value: f64 },
    #[error("csv line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ObservationSeries {
    pub fn from_columns(y: Vec<f64>, x: Vec<f64>) -> Result<Self, SeriesError> {
        if y.len() != x.len() {
            return Err(SeriesError::LengthMismatch {
                y_len: y.len(),
                x_len: x.len(),
            });
        }
        if y.len() < 3 {
            return Err(SeriesError::TooShort { rows: y.len() });
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(SeriesError::InvalidY { index: i, value: v });
            }
        }
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(SeriesError::InvalidX { index: i, value: v });
            }
        }
        Ok(Self { y, x })
    }

    /// Number of unit-spaced increments; the series holds `n + 1` rows.
    pub fn n(&self) -> usize {
        self.y.len() - 1
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Write as CSV with header `i,y,x`, one row per integer time.
    ///
    /// Floats carry 17 significant digits, enough for an exact `f64` round
    /// trip.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,y,x")?;
        for (i, (y, x)) in self.y.iter().zip(&self.x).enumerate() {
            writeln!(w, "{i},{y:.16e},{x:.16e}")?;
        }
        Ok(())
    }

    /// Parse the CSV format written by [`ObservationSeries::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self, SeriesError> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines().enumerate();
        match lines.next() {
            Some((_, Ok(header))) if header.trim() == "i,y,x" => {}
            Some((_, Ok(header))) => {
                return Err(SeriesError::Malformed {
                    line: 1,
                    message: format!("expected header 'i,y,x', got '{header}'"),
                })
            }
            Some((_, Err(e))) => return Err(e.into()),
            None => {
                return Err(SeriesError::Malformed {
                    line: 1,
                    message: "empty file".into(),
                })
            }
        }
        let mut y = Vec::new();
        let mut x = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let mut fields = line.split(',');
            let (i_str, y_str, x_str) =
                match (fields.next(), fields.next(), fields.next(), fields.next()) {
                    (Some(a), Some(b), Some(c), None) => (a, b, c),
                    _ => {
                        return Err(SeriesError::Malformed {
                            line: lineno,
                            message: "expected exactly three comma-separated fields".into(),
                        })
                    }
                };
            let i: usize = i_str.trim().parse().map_err(|e| SeriesError::Malformed {
                line: lineno,
                message: format!("bad index '{i_str}': {e}"),
            })?;
            if i != y.len() {
                return Err(SeriesError::Malformed {
                    line: lineno,
                    message: format!("out-of-order index {i}, expected {}", y.len()),
                });
            }
            let yv: f64 = y_str.trim().parse().map_err(|e| SeriesError::Malformed {
                line: lineno,
                message: format!("bad y value '{y_str}': {e}"),
            })?;
            let xv: f64 = x_str.trim().parse().map_err(|e| SeriesError::Malformed {
                line: lineno,
                message: format!("bad x value '{x_str}': {e}"),
            })?;
            y.push(yv);
            x.push(xv);
        }
        Self::from_columns(y, x)
    }
}

/// Derive a per-stream seed from a master seed and a stream index.
///
/// The map is injective in `stream` for a fixed master, so replicate streams
/// never collide; it is the splitmix64 finalizer applied to a shifted state.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut state = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut out = 0;
    for _ in 0..2 {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        out = z ^ (z >> 31);
    }
    out
}

/// Exact CIR transition over a step of length `h`:
/// `Y_{t+h} | Y_t = y ~ scale * chi'^2_nu(lambda(y))` with
/// `scale = sigma1^2 (1 - e^{-bh}) / (4b)`, `nu = 4a / sigma1^2`,
/// `lambda(y) = y e^{-bh} / scale`.
struct CirTransition {
    nu: f64,
    exp_bh: f64,
    scale: f64,
    /// Central chi-square remainder, present when `nu > 1`.
    chi2_rest: Option<Gamma<f64>>,
}

impl CirTransition {
    fn new(a: f64, b: f64, sigma1: f64, h: f64) -> Self {
        let exp_bh = (-b * h).exp();
        let one_minus = -(-b * h).exp_m1();
        let scale = sigma1 * sigma1 * one_minus / (4.0 * b);
        let nu = 4.0 * a / (sigma1 * sigma1);
        let chi2_rest = if nu > 1.0 {
            Some(Gamma::new(0.5 * (nu - 1.0), 2.0).expect("valid gamma shape"))
        } else {
            None
        };
        Self {
            nu,
            exp_bh,
            scale,
            chi2_rest,
        }
    }

    fn step<R: Rng>(&self, y: f64, rng: &mut R) -> f64 {
        let lambda = y * self.exp_bh / self.scale;
        let chi2 = match &self.chi2_rest {
            // nu > 1: chi'^2_nu(lambda) = (Z + sqrt(lambda))^2 + chi^2_{nu-1}.
            Some(rest) => {
                let z: f64 = rng.sample(StandardNormal);
                let shifted = z + lambda.sqrt();
                shifted * shifted + rest.sample(rng)
            }
            // nu <= 1: chi'^2_nu(lambda) = chi^2_{nu + 2N}, N ~ Poisson(lambda/2).
            None => {
                let mixture: f64 = if lambda > 0.0 {
                    Poisson::new(0.5 * lambda)
                        .expect("positive mean")
                        .sample(rng)
                } else {
                    0.0
                };
                Gamma::new(0.5 * self.nu + mixture, 2.0)
                    .expect("valid gamma shape")
                    .sample(rng)
            }
        };
        self.scale * chi2
    }
}

/// One unit-time transition `(Y_0, X_0) = (y, 0) -> (Y_1, dX)` on the substep
/// grid. Shared by path simulation and by the one-step moment oracles.
fn unit_step<R: Rng>(
    p: &HestonParams,
    cfg: &SimulationConfig,
    cir: Option<&CirTransition>,
    y_start: f64,
    rng: &mut R,
) -> (f64, f64) {
    let h = 1.0 / cfg.substeps as f64;
    let rho_bar = (1.0 - p.rho * p.rho).sqrt();
    match cfg.scheme {
        Scheme::ExactCir => {
            let cir = cir.expect("exact scheme requires a transition sampler");
            let ratio = p.sigma2 * p.rho / p.sigma1;
            let mut y = y_start;
            let mut dx = 0.0;
            for _ in 0..cfg.substeps {
                let y_next = cir.step(y, rng);
                let iy = 0.5 * h * (y + y_next);
                let z: f64 = rng.sample(StandardNormal);
                dx += p.alpha * h - p.beta * iy
                    + ratio * (y_next - y - p.a * h + p.b * iy)
                    + p.sigma2 * rho_bar * (iy.max(0.0)).sqrt() * z;
                y = y_next;
            }
            (y, dx)
        }
        Scheme::EulerFullTruncation => {
            let sqrt_h = h.sqrt();
            let mut y = y_start;
            let mut dx = 0.0;
            for _ in 0..cfg.substeps {
                let yp = y.max(0.0);
                let vol = yp.sqrt() * sqrt_h;
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                dx += (p.alpha - p.beta * yp) * h + p.sigma2 * vol * (p.rho * z1 + rho_bar * z2);
                y += (p.a - p.b * yp) * h + p.sigma1 * vol * z1;
            }
            (y, dx)
        }
    }
}

/// Simulate a path of `(Y, X)` and return its unit-spaced observations.
///
/// Deterministic given `(p, n, cfg)`: the whole path is drawn from a single
/// ChaCha8 stream seeded with `cfg.seed`.
pub fn simulate_path(
    p: &HestonParams,
    n: usize,
    cfg: &SimulationConfig,
) -> Result<ObservationSeries, SimulationError> {
    if cfg.substeps == 0 {
        return Err(SimulationError::ZeroSubsteps);
    }
    if n < 2 {
        return Err(SimulationError::PathTooShort { n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cir = match cfg.scheme {
        Scheme::ExactCir => Some(CirTransition::new(
            p.a,
            p.b,
            p.sigma1,
            1.0 / cfg.substeps as f64,
        )),
        Scheme::EulerFullTruncation => None,
    };

    let mut y = Vec::with_capacity(n + 1);
    let mut x = Vec::with_capacity(n + 1);
    // Internal Euler state may dip below zero; observations are clamped.
    let mut y_state = p.y0;
    let mut x_state = p.x0;
    y.push(p.y0);
    x.push(p.x0);
    for _ in 0..n {
        let (y_next, dx) = unit_step(p, cfg, cir.as_ref(), y_state, &mut rng);
        y_state = y_next;
        x_state += dx;
        y.push(y_state.max(0.0));
        x.push(x_state);
    }
    Ok(ObservationSeries { y, x })
}

/// Draw `count` unit-time transitions started from `Y = y_start`, `X = 0`.
///
/// Returns `(Y_1, X_1 - X_0)` pairs. Each transition runs on its own stream
/// derived from `(cfg.seed, index)`, so the draws are i.i.d. and reproducible
/// regardless of evaluation order.
pub fn sample_unit_transitions(
    p: &HestonParams,
    y_start: f64,
    count: usize,
    cfg: &SimulationConfig,
) -> Result<Vec<(f64, f64)>, SimulationError> {
    if cfg.substeps == 0 {
        return Err(SimulationError::ZeroSubsteps);
    }
    let cir = match cfg.scheme {
        Scheme::ExactCir => Some(CirTransition::new(
            p.a,
            p.b,
            p.sigma1,
            1.0 / cfg.substeps as f64,
        )),
        Scheme::EulerFullTruncation => None,
    };
    Ok((0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i as u64));
            let (y1, dx) = unit_step(p, cfg, cir.as_ref(), y_start, &mut rng);
            (y1.max(0.0), dx)
        })
        .collect())
}

/// I.i.d. draws from the stationary law of `Y`: a Gamma distribution with
/// shape `2a / sigma1^2` and rate `2b / sigma1^2`.
pub fn stationary_sample(p: &HestonParams, count: usize, seed: u64) -> Vec<f64> {
    let shape = 2.0 * p.a / (p.sigma1 * p.sigma1);
    let scale = p.sigma1 * p.sigma1 / (2.0 * p.b);
    let gamma = Gamma::new(shape, scale).expect("valid gamma parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| gamma.sample(&mut rng)).collect()
}
