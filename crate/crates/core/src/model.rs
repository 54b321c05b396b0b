//! Parameter domains for the subcritical Heston model
//!
//! ```text
//! dY_t = (a - b Y_t) dt + sigma1 sqrt(Y_t) dW_t
//! dX_t = (alpha - beta Y_t) dt + sigma2 sqrt(Y_t) (rho dW_t + sqrt(1-rho^2) dB_t)
//! ```
//!
//! and the bijection between the original drift parameters `(a, b, alpha, beta)`
//! and the transformed parameters `(c, d, gamma, delta)` that make the one-step
//! conditional expectations affine in the observations:
//!
//! ```text
//! c     = a (1 - e^{-b}) / b
//! d     = e^{-b}
//! gamma = alpha - a beta (e^{-b} - 1 + b) / b^2
//! delta = -beta (1 - e^{-b}) / b
//! ```
//!
//! The inverse map and its Jacobian are what turn the linear least squares
//! solution in `(c, d, gamma, delta)` into an estimator of the original
//! parameters and its limit covariance.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A parameter rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("invalid parameter {name} = {value}: must be {requirement}")]
pub struct ParamError {
    pub name: &'static str,
    pub value: f64,
    pub requirement: &'static str,
}

/// `(c, d)` fell outside `R_{++} x (0, 1)`, the image of the subcritical
/// transform; the inverse map is undefined there. Finite-sample estimates can
/// land outside the image even when the model is subcritical.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("transformed parameters (c = {c}, d = {d}) are outside R++ x (0, 1)")]
pub struct DomainError {
    pub c: f64,
    pub d: f64,
}

/// Full parameter set of the subcritical Heston model, including the
/// deterministic initial state `(y0, x0)`.
///
/// Construction enforces `a > 0`, `b > 0` (subcritical), `sigma1 > 0`,
/// `sigma2 > 0`, `|rho| < 1` and `y0 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HestonParamsRaw")]
pub struct HestonParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub y0: f64,
    pub x0: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HestonParamsRaw {
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
    y0: f64,
    x0: f64,
}

impl TryFrom<HestonParamsRaw> for HestonParams {
    type Error = ParamError;

    fn try_from(r: HestonParamsRaw) -> Result<Self, ParamError> {
        HestonParams::new(
            r.a, r.b, r.alpha, r.beta, r.sigma1, r.sigma2, r.rho, r.y0, r.x0,
        )
    }
}

fn require(
    name: &'static str,
    value: f64,
    ok: bool,
    requirement: &'static str,
) -> Result<(), ParamError> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(ParamError {
            name,
            value,
            requirement,
        })
    }
}

impl HestonParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: f64,
        b: f64,
        alpha: f64,
        beta: f64,
        sigma1: f64,
        sigma2: f64,
        rho: f64,
        y0: f64,
        x0: f64,
    ) -> Result<Self, ParamError> {
        require("a", a, a > 0.0, "strictly positive")?;
        require("b", b, b > 0.0, "strictly positive (subcritical regime)")?;
        require("alpha", alpha, true, "finite")?;
        require("beta", beta, true, "finite")?;
        require("sigma1", sigma1, sigma1 > 0.0, "strictly positive")?;
        require("sigma2", sigma2, sigma2 > 0.0, "strictly positive")?;
        require("rho", rho, rho.abs() < 1.0, "inside (-1, 1)")?;
        require("y0", y0, y0 > 0.0, "strictly positive")?;
        require("x0", x0, true, "finite")?;
        Ok(Self {
            a,
            b,
            alpha,
            beta,
            sigma1,
            sigma2,
            rho,
            y0,
            x0,
        })
    }

    /// The drift parameters `(a, b, alpha, beta)` targeted by the estimator.
    pub fn drift(&self) -> DriftParams {
        DriftParams {
            a: self.a,
            b: self.b,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    /// Forward transform `g(a, b, alpha, beta) = (c, d, gamma, delta)`.
    pub fn transformed(&self) -> TransformedParams {
        let b = self.b;
        // (1 - e^{-b}) / b, stable for small b via expm1.
        let w = -(-b).exp_m1() / b;
        let d = (-b).exp();
        let c = self.a * w;
        let delta = -self.beta * w;
        let gamma = self.alpha - self.a * self.beta * drift_curvature(b);
        TransformedParams { c, d, gamma, delta }
    }
}

/// The drift parameters `(a, b, alpha, beta)` of the model; the target of the
/// estimator of the original parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl DriftParams {
    pub fn as_array(&self) -> [f64; 4] {
        [self.a, self.b, self.alpha, self.beta]
    }
}

/// Transformed parameters `(c, d, gamma, delta)`.
///
/// The struct itself places no restriction on the values: least squares
/// estimates live in all of `R^4`. Only [`TransformedParams::invert`] and
/// [`TransformedParams::delta_jacobian`] require `(c, d)` to lie in the image
/// `R_{++} x (0, 1)` of the subcritical transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedParams {
    pub c: f64,
    pub d: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl TransformedParams {
    pub fn new(c: f64, d: f64, gamma: f64, delta: f64) -> Self {
        Self { c, d, gamma, delta }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.c, self.d, self.gamma, self.delta]
    }

    /// Whether `(c, d)` lies in the image of the subcritical transform.
    pub fn in_image(&self) -> bool {
        self.c > 0.0 && self.d > 0.0 && self.d < 1.0 && self.c.is_finite()
    }

    fn check_domain(&self) -> Result<(), DomainError> {
        if self.in_image() {
            Ok(())
        } else {
            Err(DomainError {
                c: self.c,
                d: self.d,
            })
        }
    }

    /// Inverse transform
    ///
    /// ```text
    /// a     = -c log(d) / (1 - d)
    /// b     = -log(d)
    /// alpha = gamma - c delta (d - 1 - log d) / (1 - d)^2
    /// beta  = delta log(d) / (1 - d)
    /// ```
    ///
    /// defined on `c > 0`, `d in (0, 1)`; returns [`DomainError`] otherwise.
    pub fn invert(&self) -> Result<DriftParams, DomainError> {
        self.check_domain()?;
        let r = log_ratio(self.d);
        let a = -self.c * r;
        let b = -self.d.ln();
        let alpha = self.gamma - self.c * self.delta * curvature_ratio(self.d);
        let beta = self.delta * r;
        Ok(DriftParams { a, b, alpha, beta })
    }

    /// Jacobian of the inverse transform at `(c, d, gamma, delta)`.
    ///
    /// Rows are ordered `(a, b, alpha, beta)`, columns `(c, d, gamma, delta)`;
    /// the matrix is dense 4x4 with this ordering fixed everywhere in the
    /// crate.
    pub fn delta_jacobian(&self) -> Result<Matrix4<f64>, DomainError> {
        self.check_domain()?;
        let (c, d, delta) = (self.c, self.d, self.delta);
        let r = log_ratio(d); // log d / (1 - d)
        let q = d_log_ratio(d); // (log d - 1 + 1/d) / (1 - d)^2
        let k = curvature_ratio(d); // (d - 1 - log d) / (1 - d)^2
        let t = third_ratio(d); // (2 log d - d + 1/d) / (1 - d)^3

        let mut j = Matrix4::zeros();
        j[(0, 0)] = -r;
        j[(0, 1)] = -c * q;
        j[(1, 1)] = -1.0 / d;
        j[(2, 0)] = -delta * k;
        j[(2, 1)] = c * delta * t;
        j[(2, 2)] = 1.0;
        j[(2, 3)] = -c * k;
        j[(3, 1)] = delta * q;
        j[(3, 3)] = r;
        Ok(j)
    }
}

/// Below this distance from `d = 1` the closed forms cancel catastrophically
/// and the ratios switch to their power series in `s = 1 - d`.
const SERIES_THRESHOLD: f64 = 1e-2;

pub(crate) fn horner(s: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

/// `(e^{-b} - 1 + b) / b^2`; series `sum_{j>=0} (-b)^j / (j+2)!` for small b,
/// where `b + expm1(-b)` loses most of its digits. Shared with the noise
/// constants, whose oracle comparisons need full precision down to b ~ 1e-3.
pub(crate) fn drift_curvature(b: f64) -> f64 {
    if b.abs() < 0.35 {
        horner(
            -b,
            &[
                1.0 / 2.0,
                1.0 / 6.0,
                1.0 / 24.0,
                1.0 / 120.0,
                1.0 / 720.0,
                1.0 / 5040.0,
                1.0 / 40320.0,
                1.0 / 362880.0,
                1.0 / 3628800.0,
                1.0 / 39916800.0,
                1.0 / 479001600.0,
                1.0 / 6227020800.0,
            ],
        )
    } else {
        (b + (-b).exp_m1()) / (b * b)
    }
}

/// `log(d) / (1 - d)`; series `-(1 + s/2 + s^2/3 + ...)` near `d = 1`.
fn log_ratio(d: f64) -> f64 {
    let s = 1.0 - d;
    if s.abs() < SERIES_THRESHOLD {
        -horner(
            s,
            &[
                1.0,
                1.0 / 2.0,
                1.0 / 3.0,
                1.0 / 4.0,
                1.0 / 5.0,
                1.0 / 6.0,
                1.0 / 7.0,
                1.0 / 8.0,
                1.0 / 9.0,
            ],
        )
    } else {
        d.ln() / s
    }
}

/// `(d - 1 - log d) / (1 - d)^2`; series `1/2 + s/3 + s^2/4 + ...`.
fn curvature_ratio(d: f64) -> f64 {
    let s = 1.0 - d;
    if s.abs() < SERIES_THRESHOLD {
        horner(
            s,
            &[
                1.0 / 2.0,
                1.0 / 3.0,
                1.0 / 4.0,
                1.0 / 5.0,
                1.0 / 6.0,
                1.0 / 7.0,
                1.0 / 8.0,
                1.0 / 9.0,
                1.0 / 10.0,
            ],
        )
    } else {
        (d - 1.0 - d.ln()) / (s * s)
    }
}

/// `(log d - 1 + 1/d) / (1 - d)^2`; series `sum_{j>=0} (j+1)/(j+2) s^j`.
fn d_log_ratio(d: f64) -> f64 {
    let s = 1.0 - d;
    if s.abs() < SERIES_THRESHOLD {
        horner(
            s,
            &[
                1.0 / 2.0,
                2.0 / 3.0,
                3.0 / 4.0,
                4.0 / 5.0,
                5.0 / 6.0,
                6.0 / 7.0,
                7.0 / 8.0,
                8.0 / 9.0,
                9.0 / 10.0,
            ],
        )
    } else {
        (d.ln() - 1.0 + 1.0 / d) / (s * s)
    }
}

/// `(2 log d - d + 1/d) / (1 - d)^3`; series `sum_{j>=0} (j+1)/(j+3) s^j`.
fn third_ratio(d: f64) -> f64 {
    let s = 1.0 - d;
    if s.abs() < SERIES_THRESHOLD {
        horner(
            s,
            &[
                1.0 / 3.0,
                2.0 / 4.0,
                3.0 / 5.0,
                4.0 / 6.0,
                5.0 / 7.0,
                6.0 / 8.0,
                7.0 / 9.0,
                8.0 / 10.0,
                9.0 / 11.0,
            ],
        )
    } else {
        (2.0 * d.ln() - d + 1.0 / d) / (s * s * s)
    }
}

#[cfg(test)]
mod tests {
    #![allow(clippy::excessive_precision)] // frozen oracle values keep 17 digits

    use super::*;
    use approx::assert_relative_eq;

    fn params(a: f64, b: f64, alpha: f64, beta: f64) -> HestonParams {
        HestonParams::new(a, b, alpha, beta, 0.4, 0.3, -0.5, 1.0, 0.0).unwrap()
    }

    #[test]
    fn construction_rejects_invalid_parameters() {
        assert!(HestonParams::new(0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(HestonParams::new(1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(HestonParams::new(1.0, -0.5, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(HestonParams::new(1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(HestonParams::new(1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(HestonParams::new(1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(HestonParams::new(f64::NAN, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn forward_transform_unit_parameters() {
        // a = b = 1, alpha = beta = 0: c = 1 - e^{-1}, d = e^{-1}.
        let t = params(1.0, 1.0, 0.0, 0.0).transformed();
        assert_relative_eq!(t.c, 0.63212055882855767, max_relative = 1e-15);
        assert_relative_eq!(t.d, 0.36787944117144233, max_relative = 1e-15);
        assert_eq!(t.gamma, 0.0);
        assert_eq!(t.delta, 0.0);
    }

    #[test]
    fn forward_transform_gamma_is_alpha_when_beta_zero() {
        let t = params(1.0, 1.0, 2.0, 0.0).transformed();
        assert_eq!(t.gamma, 2.0);
        assert_relative_eq!(t.c, 0.63212055882855767, max_relative = 1e-15);
    }

    #[test]
    fn forward_transform_reference_parameters() {
        let t = params(2.0, 0.5, 0.1, -1.0).transformed();
        assert_relative_eq!(t.c, 1.5738773611494663, max_relative = 1e-14);
        assert_relative_eq!(t.d, 0.60653065971263342, max_relative = 1e-15);
        assert_relative_eq!(t.gamma, 0.95224527770106737, max_relative = 1e-14);
        assert_relative_eq!(t.delta, 0.78693868057473315, max_relative = 1e-14);
    }

    #[test]
    fn inverse_recovers_unit_parameters() {
        let t = TransformedParams::new(0.63212055882855767, 0.36787944117144233, 0.0, 0.0);
        let p = t.invert().unwrap();
        assert_relative_eq!(p.a, 1.0, max_relative = 1e-14);
        assert_relative_eq!(p.b, 1.0, max_relative = 1e-14);
        assert_eq!(p.alpha, 0.0);
        assert_eq!(p.beta, 0.0);
    }

    #[test]
    fn inverse_hand_evaluated_case() {
        // c = 1, d = e^{-1}, gamma = 1, delta = 0:
        // a = e/(e-1), b = 1, alpha = 1, beta = 0.
        let t = TransformedParams::new(1.0, (-1.0f64).exp(), 1.0, 0.0);
        let p = t.invert().unwrap();
        assert_relative_eq!(p.a, 1.5819767068693265, max_relative = 1e-14);
        assert_relative_eq!(p.b, 1.0, max_relative = 1e-14);
        assert_relative_eq!(p.alpha, 1.0, max_relative = 1e-14);
        assert_eq!(p.beta, 0.0);
    }

    #[test]
    fn inverse_rejects_out_of_image() {
        assert!(TransformedParams::new(1.0, 1.5, 0.0, 0.0).invert().is_err());
        assert!(TransformedParams::new(-1.0, 0.5, 0.0, 0.0)
            .invert()
            .is_err());
        assert!(TransformedParams::new(1.0, 0.0, 0.0, 0.0).invert().is_err());
        assert!(TransformedParams::new(0.0, 0.5, 0.0, 0.0).invert().is_err());
        let err = TransformedParams::new(1.0, 1.02, 0.0, 0.0)
            .invert()
            .unwrap_err();
        assert_eq!(err.d, 1.02);
    }

    #[test]
    fn round_trip_is_tight_even_for_small_b() {
        for &b in &[1e-5, 1e-3, 9e-3, 1.1e-2, 0.5, 1.0, 3.0] {
            let p = params(1.7, b, -0.3, 0.8);
            let q = p.transformed().invert().unwrap();
            assert_relative_eq!(q.a, p.a, max_relative = 1e-12);
            assert_relative_eq!(q.b, p.b, max_relative = 1e-11);
            assert_relative_eq!(q.alpha, p.alpha, max_relative = 1e-11, epsilon = 1e-12);
            assert_relative_eq!(q.beta, p.beta, max_relative = 1e-12);
        }
    }

    #[test]
    fn jacobian_entry_formulas() {
        let t = TransformedParams::new(1.0, (-1.0f64).exp(), 0.7, 0.0);
        let j = t.delta_jacobian().unwrap();
        // J[1][1] = -1/d = -e
        assert_relative_eq!(j[(1, 1)], -std::f64::consts::E, max_relative = 1e-15);
        assert_eq!(j[(2, 2)], 1.0);
        assert_eq!(j[(0, 2)], 0.0);
        assert_eq!(j[(0, 3)], 0.0);
        // delta = 0 kills the delta-scaled entries.
        assert_eq!(j[(2, 0)], 0.0);
        assert_eq!(j[(3, 1)], 0.0);
    }

    #[test]
    fn series_branch_matches_direct_formulas() {
        // Just above the switch the direct formulas are still accurate;
        // compare both sides of the threshold on a smooth parameter sweep.
        for &s in &[1.0001e-2f64, 2e-2, 5e-2] {
            let d = 1.0 - s;
            let direct = (
                d.ln() / s,
                (d - 1.0 - d.ln()) / (s * s),
                (d.ln() - 1.0 + 1.0 / d) / (s * s),
                (2.0 * d.ln() - d + 1.0 / d) / (s * s * s),
            );
            assert_relative_eq!(log_ratio(d), direct.0, max_relative = 1e-11);
            assert_relative_eq!(curvature_ratio(d), direct.1, max_relative = 1e-10);
            assert_relative_eq!(d_log_ratio(d), direct.2, max_relative = 1e-10);
            assert_relative_eq!(third_ratio(d), direct.3, max_relative = 1e-9);
        }
        // Deep inside the series region the series is the only trustworthy
        // value; check it against exact limits at d -> 1.
        assert_relative_eq!(log_ratio(1.0 - 1e-9), -1.0, max_relative = 1e-8);
        assert_relative_eq!(curvature_ratio(1.0 - 1e-9), 0.5, max_relative = 1e-8);
    }

    #[test]
    fn monotonicity_of_c_and_d() {
        // d strictly decreasing in b; c strictly increasing in a.
        let mut last_d = f64::INFINITY;
        for i in 1..=50 {
            let b = 0.05 * i as f64;
            let d = params(1.0, b, 0.0, 0.0).transformed().d;
            assert!(d < last_d);
            last_d = d;
        }
        let mut last_c = 0.0;
        for i in 1..=50 {
            let a = 0.1 * i as f64;
            let c = params(a, 0.7, 0.0, 0.0).transformed().c;
            assert!(c > last_c);
            last_c = c;
        }
    }
}
