//! Asymptotic covariance theory for the CLS estimators.
//!
//! The one-step innovations
//!
//! ```text
//! eps_i = Y_i - c - d Y_{i-1}
//! eta_i = X_i - X_{i-1} - gamma - delta Y_{i-1}
//! ```
//!
//! are martingale differences with conditional second moments affine in the
//! previous state:
//!
//! ```text
//! E[eps^2 | F]    = C1 Y + C2
//! E[eta^2 | F]    = C3 Y + C4
//! E[eps eta | F]  = C5 Y + C6
//! ```
//!
//! The six constants have closed forms in `(a, b, beta, sigma1, sigma2, rho)`;
//! an independent nested-quadrature evaluation of their defining iterated
//! integrals is kept alongside as an oracle. Combining the constants with the
//! stationary moments of `Y` yields the martingale-CLT limit `D`, the limit
//! covariance `E` of the transformed estimate, and via the delta-method
//! Jacobian `J` the covariance `J E J^T` of the original-parameter estimate.
//! None of these depend on `alpha`.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::ClseResult;
use crate::model::{HestonParams, ParamError};
use crate::quad;
use crate::stats::normal_quantile;

/// Stationary moments `E(Y_inf^k)`, `k = 1, 2, 3`, of the Gamma limit law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryMoments {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

/// `(a/b, (2a + s1^2) a / (2 b^2), (2a + s1^2)(a + s1^2) a / (2 b^3))`.
pub fn stationary_moments(a: f64, b: f64, sigma1: f64) -> StationaryMoments {
    assert!(
        a > 0.0 && b > 0.0 && sigma1 > 0.0,
        "stationary moments need a, b, sigma1 > 0"
    );
    let s2 = sigma1 * sigma1;
    StationaryMoments {
        m1: a / b,
        m2: (2.0 * a + s2) * a / (2.0 * b * b),
        m3: (2.0 * a + s2) * (a + s2) * a / (2.0 * b * b * b),
    }
}

/// The conditional-second-moment coefficients `C1..C6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseMoments {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
}

impl NoiseMoments {
    pub fn as_array(&self) -> [f64; 6] {
        [self.c1, self.c2, self.c3, self.c4, self.c5, self.c6]
    }

    /// `[[C1, C5], [C5, C3]]`, the `Y`-proportional block.
    pub fn linear_block(&self) -> Matrix2<f64> {
        Matrix2::new(self.c1, self.c5, self.c5, self.c3)
    }

    /// `[[C2, C6], [C6, C4]]`, the constant block.
    pub fn constant_block(&self) -> Matrix2<f64> {
        Matrix2::new(self.c2, self.c6, self.c6, self.c4)
    }
}

/// Closed forms of `C1..C6`:
///
/// ```text
/// C1 = sigma1^2 e^{-2b} (e^b - 1) / b
/// C2 = a sigma1^2 (1 - e^{-b})^2 / (2 b^2)
/// C3 = b^{-3} (2 e^{-b} beta^2 sigma1^2 (sinh b - b)
///              + 2 b beta rho sigma1 sigma2 ((1 + b) e^{-b} - 1)
///              + b^2 sigma2^2 (1 - e^{-b}))
/// C4 = a beta^2 sigma1^2 [ (1 + 2 e^{-b}) / b^3 - (5 - 4 e^{-b} - e^{-2b}) / (2 b^4) ]
///      + a sigma2^2 (b - 1 + e^{-b}) / b^2
///      - 2 a beta rho sigma1 sigma2 (b (1 + e^{-b}) - 2 (1 - e^{-b})) / b^3
/// C5 = b^{-2} sigma1 e^{-b} (-beta sigma1 (e^{-b} + b - 1) + rho sigma2 b^2)
/// C6 = -a beta sigma1^2 (1 - e^{-2b} - 2 b e^{-b}) / (2 b^3)
///      + a rho sigma1 sigma2 (1 - (1 + b) e^{-b}) / b^2
/// ```
///
/// evaluated through the cancellation-free ratios below and checked against
/// [`noise_moments_quadrature`].
pub fn noise_moments(p: &HestonParams) -> NoiseMoments {
    let (a, b, beta) = (p.a, p.b, p.beta);
    let (s1, s2, rho) = (p.sigma1, p.sigma2, p.rho);
    let eb = (-b).exp();

    let c1 = s1 * s1 * eb * mean_decay(b);
    let c2 = a * s1 * s1 * mean_decay(b) * mean_decay(b) / 2.0;
    let c3 = 2.0 * eb * beta * beta * s1 * s1 * sinh_excess(b)
        - 2.0 * beta * rho * s1 * s2 * weighted_tail(b)
        + s2 * s2 * mean_decay(b);
    let c4 = a * beta * beta * s1 * s1 * simplex4(b) + a * s2 * s2 * crate::model::drift_curvature(b)
        - 2.0 * a * beta * rho * s1 * s2 * simplex3(b);
    let c5 = s1 * eb * (rho * s2 - beta * s1 * crate::model::drift_curvature(b));
    let c6 = -a * beta * s1 * s1 * decay_defect(b) + a * rho * s1 * s2 * weighted_tail(b);

    NoiseMoments {
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
    }
}

/// Below this `b` the direct forms of the ratios lose digits to cancellation
/// (the worst, [`simplex4`], loses ten digits by b = 0.002) and evaluation
/// switches to Maclaurin series with truncation below 1e-15 at the boundary.
const RATIO_SERIES_THRESHOLD: f64 = 0.35;

/// `(1 - e^{-b}) / b`, the mean of `e^{-bu}` on the unit interval.
fn mean_decay(b: f64) -> f64 {
    -(-b).exp_m1() / b
}

/// `(sinh b - b) / b^3`.
fn sinh_excess(b: f64) -> f64 {
    if b.abs() < RATIO_SERIES_THRESHOLD {
        crate::model::horner(
            b * b,
            &[
                1.0 / 6.0,
                1.0 / 120.0,
                1.0 / 5040.0,
                1.0 / 362880.0,
                1.0 / 39916800.0,
                1.0 / 6227020800.0,
                1.0 / 1307674368000.0,
            ],
        )
    } else {
        (b.sinh() - b) / (b * b * b)
    }
}

/// `(1 - (1 + b) e^{-b}) / b^2`; series `sum_j (-b)^j (j+1) / (j+2)!`.
fn weighted_tail(b: f64) -> f64 {
    if b.abs() < RATIO_SERIES_THRESHOLD {
        crate::model::horner(
            -b,
            &[
                1.0 / 2.0,
                1.0 / 3.0,
                1.0 / 8.0,
                1.0 / 30.0,
                1.0 / 144.0,
                1.0 / 840.0,
                1.0 / 5760.0,
                1.0 / 45360.0,
                1.0 / 403200.0,
                1.0 / 3991680.0,
                1.0 / 43545600.0,
                1.0 / 518918400.0,
                1.0 / 6706022400.0,
                1.0 / 93405312000.0,
            ],
        )
    } else {
        (1.0 - (1.0 + b) * (-b).exp()) / (b * b)
    }
}

/// `(1 - e^{-2b} - 2b e^{-b}) / (2 b^3)`.
fn decay_defect(b: f64) -> f64 {
    if b.abs() < RATIO_SERIES_THRESHOLD {
        crate::model::horner(
            -b,
            &[
                1.0 / 6.0,
                1.0 / 6.0,
                11.0 / 120.0,
                13.0 / 360.0,
                19.0 / 1680.0,
                1.0 / 336.0,
                247.0 / 362880.0,
                251.0 / 1814400.0,
                1013.0 / 39916800.0,
                509.0 / 119750400.0,
                1361.0 / 2075673600.0,
                1363.0 / 14529715200.0,
                16369.0 / 1307674368000.0,
                2047.0 / 1307674368000.0,
            ],
        )
    } else {
        (-(-2.0 * b).exp_m1() - 2.0 * b * (-b).exp()) / (2.0 * b * b * b)
    }
}

/// The quadruple simplex integral
/// `int_0^1 int_0^1 int_0^{min(u,v)} int_0^w e^{-b(u+v-w-z)} dz dw dv du`
/// `= (1 + 2 e^{-b}) / b^3 - (5 - 4 e^{-b} - e^{-2b}) / (2 b^4)`.
fn simplex4(b: f64) -> f64 {
    if b.abs() < RATIO_SERIES_THRESHOLD {
        crate::model::horner(
            -b,
            &[
                1.0 / 12.0,
                1.0 / 15.0,
                11.0 / 360.0,
                13.0 / 1260.0,
                19.0 / 6720.0,
                1.0 / 1512.0,
                247.0 / 1814400.0,
                251.0 / 9979200.0,
                1013.0 / 239500800.0,
                509.0 / 778377600.0,
                1361.0 / 14529715200.0,
                1363.0 / 108972864000.0,
                16369.0 / 10461394944000.0,
                2047.0 / 11115232128000.0,
            ],
        )
    } else {
        let eb = (-b).exp();
        let e2b = (-2.0 * b).exp();
        (1.0 + 2.0 * eb) / (b * b * b) - (5.0 - 4.0 * eb - e2b) / (2.0 * b * b * b * b)
    }
}

/// The triple simplex integral
/// `int_0^1 int_0^u int_0^v e^{-b(u-w)} dw dv du`
/// `= (b (1 + e^{-b}) - 2 (1 - e^{-b})) / b^3`.
fn simplex3(b: f64) -> f64 {
    if b.abs() < RATIO_SERIES_THRESHOLD {
        crate::model::horner(
            -b,
            &[
                1.0 / 6.0,
                1.0 / 12.0,
                1.0 / 40.0,
                1.0 / 180.0,
                1.0 / 1008.0,
                1.0 / 6720.0,
                1.0 / 51840.0,
                1.0 / 453600.0,
                1.0 / 4435200.0,
                1.0 / 47900160.0,
                1.0 / 566092800.0,
                1.0 / 7264857600.0,
                1.0 / 100590336000.0,
                1.0 / 1494484992000.0,
            ],
        )
    } else {
        (b * (1.0 + (-b).exp()) + 2.0 * (-b).exp_m1()) / (b * b * b)
    }
}

/// `C1..C6` by nested adaptive Gauss–Kronrod quadrature of the iterated
/// integrals that define them, with `abs_tol` per nesting level.
///
/// The `min(u, v)` upper limits are handled by splitting the `v` panel at
/// `v = u`; otherwise the integrals are evaluated exactly as written. This is
/// the independent oracle for [`noise_moments`].
pub fn noise_moments_quadrature(p: &HestonParams, abs_tol: f64) -> NoiseMoments {
    let (a, b, beta) = (p.a, p.b, p.beta);
    let (s1, s2, rho) = (p.sigma1, p.sigma2, p.rho);
    let tol = abs_tol;

    let c1 = s1 * s1 * quad::integrate(|v| (-b * (2.0 - v)).exp(), 0.0, 1.0, tol);

    let c2 = s1
        * s1
        * a
        * quad::integrate(
            |u| quad::integrate(move |v| (-b * (2.0 - v - u)).exp(), 0.0, u, tol),
            0.0,
            1.0,
            tol,
        );

    // int_0^1 int_0^1 int_0^{min(u,v)} e^{-b(u+v-w)} dw dv du
    let i1 = quad::integrate(
        |u| {
            quad::integrate_split(
                move |v| quad::integrate(move |w| (-b * (u + v - w)).exp(), 0.0, u.min(v), tol),
                0.0,
                1.0,
                &[u],
                tol,
            )
        },
        0.0,
        1.0,
        tol,
    );
    let i2 = quad::integrate(
        |u| quad::integrate(move |_v| (-b * u).exp(), 0.0, u, tol),
        0.0,
        1.0,
        tol,
    );
    let i3 = quad::integrate(|u| (-b * u).exp(), 0.0, 1.0, tol);
    let c3 = beta * beta * s1 * s1 * i1 - 2.0 * beta * s1 * s2 * rho * i2 + s2 * s2 * i3;

    // int_0^1 int_0^1 int_0^{min(u,v)} int_0^w e^{-b(u+v-w-z)} dz dw dv du
    let ia = quad::integrate(
        |u| {
            quad::integrate_split(
                move |v| {
                    quad::integrate(
                        move |w| {
                            quad::integrate(move |z| (-b * (u + v - w - z)).exp(), 0.0, w, tol)
                        },
                        0.0,
                        u.min(v),
                        tol,
                    )
                },
                0.0,
                1.0,
                &[u],
                tol,
            )
        },
        0.0,
        1.0,
        tol,
    );
    let ib = quad::integrate(
        |u| quad::integrate(move |v| (-b * (u - v)).exp(), 0.0, u, tol),
        0.0,
        1.0,
        tol,
    );
    let ic = quad::integrate(
        |u| {
            quad::integrate(
                move |v| quad::integrate(move |w| (-b * (u - w)).exp(), 0.0, v, tol),
                0.0,
                u,
                tol,
            )
        },
        0.0,
        1.0,
        tol,
    );
    let c4 =
        a * beta * beta * s1 * s1 * ia + a * s2 * s2 * ib - 2.0 * a * beta * s1 * s2 * rho * ic;

    let i5 = quad::integrate(
        |u| quad::integrate(move |v| (-b * (u - v + 1.0)).exp(), 0.0, u, tol),
        0.0,
        1.0,
        tol,
    );
    let c5 = -beta * s1 * s1 * i5 + s1 * s2 * rho * (-b).exp();

    let id = quad::integrate(
        |u| {
            quad::integrate(
                move |v| quad::integrate(move |s| (-b * (u - v - s + 1.0)).exp(), 0.0, v, tol),
                0.0,
                u,
                tol,
            )
        },
        0.0,
        1.0,
        tol,
    );
    let ie = quad::integrate(
        |v| quad::integrate(move |s| (-b * (1.0 - s)).exp(), 0.0, v, tol),
        0.0,
        1.0,
        tol,
    );
    let c6 = -a * beta * s1 * s1 * id + a * s1 * s2 * rho * ie;

    NoiseMoments {
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
    }
}

/// Kronecker product of two 2x2 blocks into a 4x4 matrix:
/// `(K ⊗ M)[2i+k][2j+l] = K[i][j] M[k][l]`.
pub fn kron2(k: &Matrix2<f64>, m: &Matrix2<f64>) -> Matrix4<f64> {
    let mut out = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for r in 0..2 {
                for c in 0..2 {
                    out[(2 * i + r, 2 * j + c)] = k[(i, j)] * m[(r, c)];
                }
            }
        }
    }
    out
}

/// Limit matrices for the transformed estimate `(c, d, gamma, delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedCovariance {
    /// Martingale-CLT limit `D`.
    pub d_mat: Matrix4<f64>,
    /// Covariance `E` of `sqrt(n) ((c,d,gamma,delta)-hat - truth)`.
    pub e_mat: Matrix4<f64>,
    pub moments: StationaryMoments,
    pub noise: NoiseMoments,
}

/// Full limit theory including the delta-method step to `(a, b, alpha, beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCovariance {
    pub d_mat: Matrix4<f64>,
    pub e_mat: Matrix4<f64>,
    /// Jacobian of the inverse transform at the true parameters.
    pub j_mat: Matrix4<f64>,
    /// `J E J^T`, covariance of `sqrt(n) ((a,b,alpha,beta)-hat - truth)`.
    pub sandwich: Matrix4<f64>,
    pub moments: StationaryMoments,
    pub noise: NoiseMoments,
}

fn moment_matrix_a(m: &StationaryMoments) -> Matrix2<f64> {
    Matrix2::new(1.0, m.m1, m.m1, m.m2)
}

/// `E` and `D` for the transformed estimate.
///
/// `E` is assembled from the closed-form Kronecker representation
/// `E = [[C1,C5],[C5,C3]] ⊗ M1 + [[C2,C6],[C6,C4]] ⊗ M2`, and `D` from
/// `D = [[C1,C5],[C5,C3]] ⊗ [[m1,m2],[m2,m3]] + [[C2,C6],[C6,C4]] ⊗ [[1,m1],[m1,m2]]`.
/// The algebraic identity `E = (I2 ⊗ A)^{-1} D (I2 ⊗ A)^{-1}`,
/// `A = [[1,m1],[m1,m2]]`, ties the two together; its residual is exposed by
/// [`sandwich_identity_residual`] and asserted in debug builds.
pub fn covariance_e(p: &HestonParams) -> TransformedCovariance {
    let (a, b, s1sq) = (p.a, p.b, p.sigma1 * p.sigma1);
    let moments = stationary_moments(p.a, p.b, p.sigma1);
    let noise = noise_moments(p);

    let m1 = Matrix2::new(
        a * (2.0 * a + s1sq) / (b * s1sq),
        -(2.0 * a + s1sq) / s1sq,
        -(2.0 * a + s1sq) / s1sq,
        2.0 * b * (a + s1sq) / (a * s1sq),
    );
    let m2 = Matrix2::new(
        (2.0 * a + s1sq) / s1sq,
        -2.0 * b / s1sq,
        -2.0 * b / s1sq,
        2.0 * b * b / (a * s1sq),
    );
    let e_mat = kron2(&noise.linear_block(), &m1) + kron2(&noise.constant_block(), &m2);

    let third = Matrix2::new(moments.m1, moments.m2, moments.m2, moments.m3);
    let d_mat = kron2(&noise.linear_block(), &third)
        + kron2(&noise.constant_block(), &moment_matrix_a(&moments));

    let out = TransformedCovariance {
        d_mat,
        e_mat,
        moments,
        noise,
    };
    // The identity check inverts A twice, so its own rounding grows with the
    // squared condition number of A; widen the gate accordingly rather than
    // firing on well-formed but nearly deterministic parameter sets, and skip
    // it entirely when A is singular at working precision (sigma1 ~ 0).
    #[cfg(debug_assertions)]
    if let Some(residual) = sandwich_identity_residual_of(&out) {
        let variance = moments.m2 - moments.m1 * moments.m1;
        let cond = (moments.m2.max(1.0) / variance).powi(2);
        let tol = 1e-10f64.max(1e3 * f64::EPSILON * cond);
        debug_assert!(
            residual < tol,
            "closed-form E disagrees with (I2 (x) A)^-1 D (I2 (x) A)^-1: residual {residual}"
        );
    }
    out
}

/// Max relative entrywise residual of `E - (I2 ⊗ A)^{-1} D (I2 ⊗ A)^{-1}`.
///
/// `None` when the moment matrix `A` is singular at working precision (the
/// stationary variance underflows against `m1^2`), in which case the identity
/// cannot be evaluated.
pub fn sandwich_identity_residual(p: &HestonParams) -> Option<f64> {
    sandwich_identity_residual_of(&covariance_e(p))
}

fn sandwich_identity_residual_of(cov: &TransformedCovariance) -> Option<f64> {
    let a = moment_matrix_a(&cov.moments);
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let a_scale = a.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if det.abs() <= 16.0 * f64::EPSILON * a_scale * a_scale {
        return None;
    }
    let a_inv = a.try_inverse()?;
    let big = kron2(&Matrix2::identity(), &a_inv);
    let reconstructed = big * cov.d_mat * big;
    let scale = cov
        .e_mat
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    Some(
        (cov.e_mat - reconstructed)
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
            / scale,
    )
}

/// Full limit theory at `p`: `D`, `E`, `J` and the sandwich `J E J^T`.
///
/// Depends on `(a, b, beta, sigma1, sigma2, rho)` but not on `alpha`.
pub fn covariance_original(p: &HestonParams) -> AsymptoticCovariance {
    let base = covariance_e(p);
    let j_mat = p
        .transformed()
        .delta_jacobian()
        .expect("valid subcritical parameters map inside the image");
    let sandwich = j_mat * base.e_mat * j_mat.transpose();
    AsymptoticCovariance {
        d_mat: base.d_mat,
        e_mat: base.e_mat,
        j_mat,
        sandwich,
        moments: base.moments,
        noise: base.noise,
    }
}

/// Volatility parameters treated as known when evaluating the covariance at a
/// plug-in estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnownVols {
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

#[derive(Debug, Error)]
pub enum CiError {
    #[error("no original-parameter estimate: the transformed estimate was outside the image")]
    MissingOriginal,
    #[error("confidence level must be inside (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error(transparent)]
    InvalidVols(#[from] ParamError),
}

/// Per-parameter plug-in confidence intervals, each `(lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceIntervals {
    pub level: f64,
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
}

impl ConfidenceIntervals {
    pub fn as_array(&self) -> [(f64, f64); 4] {
        [self.a, self.b, self.alpha, self.beta]
    }

    /// Whether each component of `truth` lies inside its interval.
    pub fn covers(&self, truth: &[f64; 4]) -> [bool; 4] {
        let arr = self.as_array();
        std::array::from_fn(|k| truth[k] >= arr[k].0 && truth[k] <= arr[k].1)
    }
}

/// Plug-in asymptotic confidence intervals
/// `theta_k +/- z_{(1+level)/2} sqrt(sandwich[k][k] / n)`, with the sandwich
/// evaluated at the estimated drift parameters and the supplied known
/// volatilities.
pub fn confidence_intervals(
    result: &ClseResult,
    vols: &KnownVols,
    level: f64,
) -> Result<ConfidenceIntervals, CiError> {
    let original = result.original.ok_or(CiError::MissingOriginal)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(CiError::InvalidLevel(level));
    }
    // The initial state is irrelevant to the covariance; any valid one works.
    let plug_in = HestonParams::new(
        original.a,
        original.b,
        original.alpha,
        original.beta,
        vols.sigma1,
        vols.sigma2,
        vols.rho,
        1.0,
        0.0,
    )?;
    let sandwich = covariance_original(&plug_in).sandwich;
    let z = normal_quantile(0.5 * (1.0 + level));
    let n = result.n as f64;
    let est = original.as_array();
    let mut bounds = [(0.0, 0.0); 4];
    for k in 0..4 {
        let half = z * (sandwich[(k, k)] / n).sqrt();
        bounds[k] = (est[k] - half, est[k] + half);
    }
    Ok(ConfidenceIntervals {
        level,
        a: bounds[0],
        b: bounds[1],
        alpha: bounds[2],
        beta: bounds[3],
    })
}

/// Row-major copy of a 4x4 matrix for serialization.
pub fn matrix_rows(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// JSON document for the asymptotics command: the four matrices (row-major)
/// plus the scalars that feed them and optional oracle diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    pub d: [[f64; 4]; 4],
    pub e: [[f64; 4]; 4],
    pub j: [[f64; 4]; 4],
    pub sandwich: [[f64; 4]; 4],
    pub stationary_moments: StationaryMoments,
    pub noise_moments: NoiseMoments,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<QuadratureDiagnostics>,
}

/// Residuals of the closed forms against their quadrature oracle.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureDiagnostics {
    pub closed_form: [f64; 6],
    pub quadrature: [f64; 6],
    pub max_relative_residual: f64,
    /// `None` when the identity is not evaluable at working precision.
    pub sandwich_identity_residual: Option<f64>,
}

impl AsymptoticsReport {
    pub fn new(p: &HestonParams, quadrature_tol: Option<f64>) -> Self {
        let cov = covariance_original(p);
        let diagnostics = quadrature_tol.map(|tol| {
            let closed = cov.noise.as_array();
            let oracle = noise_moments_quadrature(p, tol).as_array();
            let max_rel = closed
                .iter()
                .zip(&oracle)
                .map(|(c, q)| (c - q).abs() / c.abs().max(1e-300))
                .fold(0.0f64, f64::max);
            QuadratureDiagnostics {
                closed_form: closed,
                quadrature: oracle,
                max_relative_residual: max_rel,
                sandwich_identity_residual: sandwich_identity_residual(p),
            }
        });
        AsymptoticsReport {
            d: matrix_rows(&cov.d_mat),
            e: matrix_rows(&cov.e_mat),
            j: matrix_rows(&cov.j_mat),
            sandwich: matrix_rows(&cov.sandwich),
            stationary_moments: cov.moments,
            noise_moments: cov.noise,
            diagnostics,
        }
    }
}
