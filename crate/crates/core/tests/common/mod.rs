//! Shared fixtures for the integration suites.
#![allow(dead_code)] // each test binary uses a different subset

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use heston_clse::{HestonParams, ObservationSeries, TransformedParams};

/// The parameter set used by the statistical suites.
pub fn reference_params() -> HestonParams {
    HestonParams::new(2.0, 0.5, 0.1, -1.0, 0.4, 0.3, -0.5, 1.0, 0.0)
        .expect("reference parameters are valid")
}

/// Random valid model parameters with magnitudes bounded away from the
/// degenerate corners, so relative-error assertions are meaningful.
pub fn random_params(rng: &mut ChaCha8Rng) -> HestonParams {
    let sign = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
    HestonParams::new(
        rng.random_range(0.05..5.0),
        rng.random_range(1e-3..3.0),
        sign(rng) * rng.random_range(0.1..3.0),
        sign(rng) * rng.random_range(0.1..3.0),
        rng.random_range(0.05..1.5),
        rng.random_range(0.05..1.5),
        rng.random_range(-0.95..0.95),
        rng.random_range(0.1..3.0),
        rng.random_range(-2.0..2.0),
    )
    .expect("drawn parameters are valid")
}

/// Random transformed parameters inside the subcritical image, away from its
/// boundary.
pub fn random_transformed(rng: &mut ChaCha8Rng) -> TransformedParams {
    let sign = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
    TransformedParams::new(
        rng.random_range(0.1..3.0),
        rng.random_range(0.05..0.95),
        sign(rng) * rng.random_range(0.1..2.0),
        sign(rng) * rng.random_range(0.1..2.0),
    )
}

/// A nonconstant, nonnegative regressor path with a correlated response,
/// arbitrary except for satisfying the series invariants.
pub fn random_series(rng: &mut ChaCha8Rng, n: usize) -> ObservationSeries {
    let mut y = Vec::with_capacity(n + 1);
    let mut x = Vec::with_capacity(n + 1);
    let mut yv: f64 = rng.random_range(0.5..2.0);
    let mut xv: f64 = rng.random_range(-1.0..1.0);
    for _ in 0..=n {
        y.push(yv);
        x.push(xv);
        yv = (0.3 + 0.7 * yv + 0.4 * rng.random_range(-1.0..1.0f64)).abs();
        xv += 0.1 - 0.5 * yv + 0.6 * rng.random_range(-1.0..1.0f64);
    }
    ObservationSeries::from_columns(y, x).expect("generated series is valid")
}

/// Least squares fit of the two stacked regressions by dense QR, the generic
/// oracle the closed-form estimator must reproduce.
pub fn qr_least_squares(obs: &ObservationSeries) -> TransformedParams {
    let y = obs.y();
    let x = obs.x();
    let n = obs.n();
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { y[i] });
    let qr = design.qr();
    let q = qr.q();
    let r = qr.r();
    let solve = |rhs: DVector<f64>| {
        let qt_rhs = q.transpose() * rhs;
        r.solve_upper_triangular(&qt_rhs)
            .expect("design matrix has full column rank")
    };
    let cd = solve(DVector::from_fn(n, |i, _| y[i + 1]));
    let gd = solve(DVector::from_fn(n, |i, _| x[i + 1] - x[i]));
    TransformedParams::new(cd[0], cd[1], gd[0], gd[1])
}

/// Mean and Monte Carlo standard error of a sample.
pub fn mean_and_se(sample: &[f64]) -> (f64, f64) {
    let m = sample.len() as f64;
    let mean = heston_clse::numeric::compensated_mean(sample);
    let var = sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}
