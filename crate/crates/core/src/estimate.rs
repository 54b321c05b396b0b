//! Conditional least squares estimation from unit-spaced observations.
//!
//! The transformed parameters `(c, d, gamma, delta)` make both one-step
//! conditional expectations affine in the state,
//!
//! ```text
//! E[Y_i | F_{i-1}]           = c + d Y_{i-1}
//! E[X_i - X_{i-1} | F_{i-1}] = gamma + delta Y_{i-1}
//! ```
//!
//! so the least squares problem splits into two 2x2 linear systems sharing a
//! single Gram matrix `[[n, S1], [S1, S2]]` with `S1 = sum Y_{i-1}`,
//! `S2 = sum Y_{i-1}^2`:
//!
//! ```text
//! (c, d)         from (sum Y_i,        sum Y_i Y_{i-1})
//! (gamma, delta) from (X_n - X_0,      sum (X_i - X_{i-1}) Y_{i-1})
//! ```
//!
//! Mapping the solution through the inverse parameter transform yields the
//! estimator of `(a, b, alpha, beta)` whenever `(c, d)` lands inside
//! `R_{++} x (0, 1)`; outside the image the original-parameter estimate is
//! reported as absent, never projected.

use nalgebra::Matrix2;
use serde::Serialize;
use thiserror::Error;

use crate::model::{DriftParams, TransformedParams};
use crate::numeric::KahanSum;
use crate::simulate::ObservationSeries;

/// Relative determinant threshold below which the Gram matrix is treated as
/// singular. The determinant is compared against `tol * n * sum Y^2`.
const GRAM_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum EstimateError {
    /// All regressor values coincide (`Y_0 = ... = Y_{n-1}`), an almost
    /// surely null event for genuine CIR data.
    #[error("gram matrix is numerically singular: the regressor Y_0..Y_(n-1) is (near) constant")]
    SingularGram,
}

/// Result of a CLS fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClseResult {
    /// The transformed-parameter estimate; exists whenever the Gram matrix is
    /// nonsingular, with components anywhere in `R^4`.
    pub transformed: TransformedParams,
    /// The original-parameter estimate; present iff `(c, d)` lies inside the
    /// image `R_{++} x (0, 1)` of the subcritical transform.
    pub original: Option<DriftParams>,
    /// Number of unit-spaced increments used.
    pub n: usize,
    /// The Gram matrix `[[n, sum Y_{i-1}], [sum Y_{i-1}, sum Y_{i-1}^2]]`.
    pub gram: Matrix2<f64>,
}

impl ClseResult {
    /// True when the transformed estimate fell outside the image of the
    /// subcritical transform, so no original-parameter estimate exists.
    pub fn out_of_image(&self) -> bool {
        self.original.is_none()
    }
}

struct MomentSums {
    n: f64,
    sum_y: f64,
    sum_yy: f64,
    sum_resp_y: f64,
    sum_resp_yy: f64,
    dx_total: f64,
    sum_dx_y: f64,
}

fn moment_sums(obs: &ObservationSeries) -> MomentSums {
    let y = obs.y();
    let x = obs.x();
    let n = obs.n();
    let mut sum_y = KahanSum::new();
    let mut sum_yy = KahanSum::new();
    let mut sum_resp_y = KahanSum::new();
    let mut sum_resp_yy = KahanSum::new();
    let mut sum_dx_y = KahanSum::new();
    for i in 1..=n {
        let prev = y[i - 1];
        sum_y.add(prev);
        sum_yy.add(prev * prev);
        sum_resp_y.add(y[i]);
        sum_resp_yy.add(y[i] * prev);
        sum_dx_y.add((x[i] - x[i - 1]) * prev);
    }
    MomentSums {
        n: n as f64,
        sum_y: sum_y.value(),
        sum_yy: sum_yy.value(),
        sum_resp_y: sum_resp_y.value(),
        sum_resp_yy: sum_resp_yy.value(),
        dx_total: x[n] - x[0],
        sum_dx_y: sum_dx_y.value(),
    }
}

/// Solve the shared 2x2 normal equations for one response pair.
fn solve_gram(s: &MomentSums, rhs0: f64, rhs1: f64) -> Result<(f64, f64), EstimateError> {
    let det = s.n * s.sum_yy - s.sum_y * s.sum_y;
    // Negated form so a NaN determinant also lands in the singular branch.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(det > GRAM_TOL * s.n * s.sum_yy) {
        return Err(EstimateError::SingularGram);
    }
    let intercept = (s.sum_yy * rhs0 - s.sum_y * rhs1) / det;
    let slope = (s.n * rhs1 - s.sum_y * rhs0) / det;
    Ok((intercept, slope))
}

/// CLSE of the transformed parameters `(c, d, gamma, delta)`.
pub fn clse_transformed(obs: &ObservationSeries) -> Result<TransformedParams, EstimateError> {
    let s = moment_sums(obs);
    let (c, d) = solve_gram(&s, s.sum_resp_y, s.sum_resp_yy)?;
    let (gamma, delta) = solve_gram(&s, s.dx_total, s.sum_dx_y)?;
    Ok(TransformedParams::new(c, d, gamma, delta))
}

/// CLSE of the transformed parameters, mapped to the original parameters
/// where the inverse transform is defined.
pub fn clse_original(obs: &ObservationSeries) -> Result<ClseResult, EstimateError> {
    let s = moment_sums(obs);
    let (c, d) = solve_gram(&s, s.sum_resp_y, s.sum_resp_yy)?;
    let (gamma, delta) = solve_gram(&s, s.dx_total, s.sum_dx_y)?;
    let transformed = TransformedParams::new(c, d, gamma, delta);
    let original = transformed.invert().ok();
    Ok(ClseResult {
        transformed,
        original,
        n: obs.n(),
        gram: Matrix2::new(s.n, s.sum_y, s.sum_y, s.sum_yy),
    })
}

/// Residuals `eps_i = Y_i - c - d Y_{i-1}` and
/// `eta_i = X_i - X_{i-1} - gamma - delta Y_{i-1}`, `i = 1..=n`.
///
/// At the fitted CLSE all four orthogonality sums
/// `sum eps`, `sum Y eps`, `sum eta`, `sum Y eta` vanish.
pub fn residuals(obs: &ObservationSeries, t: &TransformedParams) -> (Vec<f64>, Vec<f64>) {
    let y = obs.y();
    let x = obs.x();
    let n = obs.n();
    let mut eps = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    for i in 1..=n {
        eps.push(y[i] - t.c - t.d * y[i - 1]);
        eta.push(x[i] - x[i - 1] - t.gamma - t.delta * y[i - 1]);
    }
    (eps, eta)
}

/// The CLS objective `sum eps_i^2 + eta_i^2` at `t`.
pub fn objective(obs: &ObservationSeries, t: &TransformedParams) -> f64 {
    let (eps, eta) = residuals(obs, t);
    let mut acc = KahanSum::new();
    for (e, h) in eps.iter().zip(&eta) {
        acc.add(e * e + h * h);
    }
    acc.value()
}

/// Flat JSON document for a CLS fit, optionally with plug-in confidence
/// intervals attached by the caller.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub c: f64,
    pub d: f64,
    pub gamma: f64,
    pub delta: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub out_of_image: bool,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<crate::asymptotics::ConfidenceIntervals>,
}

impl EstimateReport {
    pub fn new(result: &ClseResult, ci: Option<crate::asymptotics::ConfidenceIntervals>) -> Self {
        Self {
            c: result.transformed.c,
            d: result.transformed.d,
            gamma: result.transformed.gamma,
            delta: result.transformed.delta,
            a: result.original.map(|o| o.a),
            b: result.original.map(|o| o.b),
            alpha: result.original.map(|o| o.alpha),
            beta: result.original.map(|o| o.beta),
            out_of_image: result.out_of_image(),
            n: result.n,
            ci,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(y: &[f64], x: &[f64]) -> ObservationSeries {
        ObservationSeries::from_columns(y.to_vec(), x.to_vec()).unwrap()
    }

    #[test]
    fn interpolating_series_is_fit_exactly() {
        // (Y_{i-1}, Y_i) = (1,2), (2,3) and (Y_{i-1}, dX) = (1,1), (2,2):
        // both regressions interpolate, giving (c, d, gamma, delta) = (1,1,0,1).
        let obs = series(&[1.0, 2.0, 3.0], &[0.0, 1.0, 3.0]);
        let t = clse_transformed(&obs).unwrap();
        assert_relative_eq!(t.c, 1.0, max_relative = 1e-12);
        assert_relative_eq!(t.d, 1.0, max_relative = 1e-12);
        assert!(t.gamma.abs() < 1e-12);
        assert_relative_eq!(t.delta, 1.0, max_relative = 1e-12);
        // d = 1 is outside (0, 1): transformed fit exists, original does not.
        let r = clse_original(&obs).unwrap();
        assert!(r.out_of_image());
        assert_eq!(r.n, 2);
    }

    #[test]
    fn constant_regressor_is_singular() {
        let obs = series(&[5.0, 5.0, 5.0], &[0.0, 1.0, 2.0]);
        assert!(matches!(
            clse_transformed(&obs),
            Err(EstimateError::SingularGram)
        ));
        assert!(matches!(
            clse_original(&obs),
            Err(EstimateError::SingularGram)
        ));
    }

    #[test]
    fn noiseless_data_recovers_exactly() {
        // Build Y_i = c + d Y_{i-1}, dX_i = gamma + delta Y_{i-1} with zero
        // noise from a non-constant start.
        let (c, d, gamma, delta) = (0.9, 0.55, 0.2, -0.4);
        let mut y = vec![0.5];
        let mut x = vec![0.5];
        for i in 0..40 {
            let prev = y[i];
            y.push(c + d * prev);
            x.push(x[i] + gamma + delta * prev);
        }
        let obs = series(&y, &x);
        let t = clse_transformed(&obs).unwrap();
        assert_relative_eq!(t.c, c, max_relative = 1e-12);
        assert_relative_eq!(t.d, d, max_relative = 1e-12);
        assert_relative_eq!(t.gamma, gamma, max_relative = 1e-12);
        assert_relative_eq!(t.delta, delta, max_relative = 1e-12);

        let r = clse_original(&obs).unwrap();
        let back = r.original.unwrap();
        let forward = crate::model::HestonParams::new(
            back.a, back.b, back.alpha, back.beta, 0.3, 0.3, 0.0, 1.0, 0.0,
        )
        .unwrap()
        .transformed();
        assert_relative_eq!(forward.c, t.c, max_relative = 1e-10);
        assert_relative_eq!(forward.d, t.d, max_relative = 1e-10);
        assert_relative_eq!(forward.gamma, t.gamma, max_relative = 1e-10);
        assert_relative_eq!(forward.delta, t.delta, max_relative = 1e-10);
    }

    #[test]
    fn residual_orthogonality_at_the_fit() {
        let p =
            crate::model::HestonParams::new(2.0, 0.5, 0.1, -1.0, 0.4, 0.3, -0.5, 1.0, 0.0).unwrap();
        let cfg = crate::simulate::SimulationConfig::default().with_seed(21);
        let obs = crate::simulate::simulate_path(&p, 2000, &cfg).unwrap();
        let t = clse_transformed(&obs).unwrap();
        let (eps, eta) = residuals(&obs, &t);
        let scale: f64 = obs.y().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let tol = 1e-8 * obs.n() as f64 * scale.max(1.0);
        let dot = |r: &[f64], with_y: bool| -> f64 {
            r.iter()
                .enumerate()
                .map(|(i, v)| if with_y { v * obs.y()[i] } else { *v })
                .sum()
        };
        assert!(dot(&eps, false).abs() < tol);
        assert!(dot(&eps, true).abs() < tol);
        assert!(dot(&eta, false).abs() < tol);
        assert!(dot(&eta, true).abs() < tol);
    }

    #[test]
    fn original_estimate_is_consistent_with_transformed() {
        let p =
            crate::model::HestonParams::new(2.0, 0.5, 0.1, -1.0, 0.4, 0.3, -0.5, 1.0, 0.0).unwrap();
        let cfg = crate::simulate::SimulationConfig::default().with_seed(77);
        let obs = crate::simulate::simulate_path(&p, 3000, &cfg).unwrap();
        let r = clse_original(&obs).unwrap();
        let back = r.original.expect("in image at this sample size");
        let forward = crate::model::HestonParams::new(
            back.a, back.b, back.alpha, back.beta, p.sigma1, p.sigma2, p.rho, p.y0, p.x0,
        )
        .unwrap()
        .transformed();
        for (f, t) in forward.as_array().iter().zip(r.transformed.as_array()) {
            assert_relative_eq!(f, &t, max_relative = 1e-10);
        }
    }

    #[test]
    fn shifting_c_shifts_residual_sum_linearly() {
        let obs = series(&[1.0, 2.0, 1.5, 2.5], &[0.0, 0.3, 0.1, 0.6]);
        let t = clse_transformed(&obs).unwrap();
        let (eps, _) = residuals(&obs, &t);
        let shifted = TransformedParams::new(t.c + 1.0, t.d, t.gamma, t.delta);
        let (eps2, _) = residuals(&obs, &shifted);
        let sum: f64 = eps.iter().sum();
        let sum2: f64 = eps2.iter().sum();
        // Each residual drops by exactly 1, so the sum drops by n.
        assert_relative_eq!(sum - sum2, obs.n() as f64, max_relative = 1e-12);
    }

    #[test]
    fn truth_on_noiseless_data_gives_zero_residuals() {
        let (c, d, gamma, delta) = (1.2, 0.4, -0.1, 0.7);
        let mut y = vec![1.0];
        let mut x = vec![0.0];
        for i in 0..10 {
            y.push(c + d * y[i]);
            x.push(x[i] + gamma + delta * y[i]);
        }
        let obs = series(&y, &x);
        let (eps, eta) = residuals(&obs, &TransformedParams::new(c, d, gamma, delta));
        assert!(eps.iter().all(|v| v.abs() < 1e-12));
        assert!(eta.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn estimator_ignores_level_shifts_of_x() {
        let p =
            crate::model::HestonParams::new(2.0, 0.5, 0.1, -1.0, 0.4, 0.3, -0.5, 1.0, 0.0).unwrap();
        let cfg = crate::simulate::SimulationConfig::default().with_seed(33);
        let obs = crate::simulate::simulate_path(&p, 500, &cfg).unwrap();
        let shifted = ObservationSeries::from_columns(
            obs.y().to_vec(),
            obs.x().iter().map(|v| v + 1000.0).collect(),
        )
        .unwrap();
        let t0 = clse_transformed(&obs).unwrap();
        let t1 = clse_transformed(&shifted).unwrap();
        assert_relative_eq!(t0.c, t1.c, max_relative = 1e-12);
        assert_relative_eq!(t0.d, t1.d, max_relative = 1e-12);
        assert_relative_eq!(t0.gamma, t1.gamma, max_relative = 1e-9, epsilon = 1e-10);
        assert_relative_eq!(t0.delta, t1.delta, max_relative = 1e-9, epsilon = 1e-10);
    }

    #[test]
    fn gram_matrix_is_reported() {
        let obs = series(&[1.0, 2.0, 3.0], &[0.0, 1.0, 3.0]);
        let r = clse_original(&obs).unwrap();
        assert_eq!(r.gram[(0, 0)], 2.0);
        assert_eq!(r.gram[(0, 1)], 3.0);
        assert_eq!(r.gram[(1, 0)], 3.0);
        assert_eq!(r.gram[(1, 1)], 5.0);
    }
}
