//! Simulation, conditional least squares estimation, and asymptotic theory
//! for the subcritical Heston model observed at integer times.
//!
//! The crate is organized around the pipeline
//!
//! 1. [`model`]: parameter domains and the bijection between the original
//!    drift parameters `(a, b, alpha, beta)` and the transformed parameters
//!    `(c, d, gamma, delta)` in which the least squares problem is linear;
//! 2. [`simulate`]: exact-transition and Euler path generation producing
//!    unit-spaced observations;
//! 3. [`estimate`]: the closed-form CLS estimator and its mapping back to the
//!    original parameters;
//! 4. [`asymptotics`]: stationary moments, the conditional-noise constants
//!    `C1..C6`, the limit covariances `E` and `J E J^T`, and plug-in
//!    confidence intervals;
//! 5. [`montecarlo`]: replicated experiments checking consistency, normality
//!    of whitened errors, and interval coverage.
//!
//! Supporting numerics live in [`quad`] (adaptive Gauss–Kronrod, used as an
//! independent oracle for the closed forms), [`stats`], and [`numeric`].

pub mod asymptotics;
pub mod estimate;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod quad;
pub mod simulate;
pub mod stats;

pub use asymptotics::{
    confidence_intervals, covariance_e, covariance_original, noise_moments,
    noise_moments_quadrature, sandwich_identity_residual, stationary_moments, AsymptoticCovariance,
    ConfidenceIntervals, KnownVols, NoiseMoments, StationaryMoments, TransformedCovariance,
};
pub use estimate::{clse_original, clse_transformed, residuals, ClseResult, EstimateError};
pub use model::{DomainError, DriftParams, HestonParams, ParamError, TransformedParams};
pub use montecarlo::{
    run_experiment, whiten_errors, ExperimentConfig, ExperimentOutput, ExperimentReport,
    WhitenError,
};
pub use simulate::{
    derive_seed, sample_unit_transitions, simulate_path, stationary_sample, ObservationSeries,
    Scheme, SeriesError, SimulationConfig, SimulationError,
};
