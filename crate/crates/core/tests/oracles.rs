//! Independent-oracle cross checks: finite differences for the Jacobian,
//! quadrature for the transform integrals, one-step Monte Carlo for the
//! conditional moments, and a dense QR solve for the estimator.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{mean_and_se, qr_least_squares, random_series, random_transformed, reference_params};
use heston_clse::{
    clse_transformed, estimate::objective, quad, sample_unit_transitions, simulate_path, Scheme,
    SimulationConfig, TransformedParams,
};

#[test]
fn jacobian_matches_central_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let step = 1e-6;
    for _ in 0..100 {
        let t = random_transformed(&mut rng);
        let j = t.delta_jacobian().unwrap();
        let at = |c, d, gamma, delta| {
            TransformedParams::new(c, d, gamma, delta)
                .invert()
                .unwrap()
                .as_array()
        };
        for col in 0..4 {
            let mut lo = [t.c, t.d, t.gamma, t.delta];
            let mut hi = lo;
            lo[col] -= step;
            hi[col] += step;
            let f_lo = at(lo[0], lo[1], lo[2], lo[3]);
            let f_hi = at(hi[0], hi[1], hi[2], hi[3]);
            for row in 0..4 {
                let fd = (f_hi[row] - f_lo[row]) / (2.0 * step);
                let analytic = j[(row, col)];
                let tol = 1e-6 * analytic.abs().max(1e-8);
                assert!(
                    (fd - analytic).abs() <= tol,
                    "J[{row}][{col}] at {t:?}: analytic {analytic}, fd {fd}"
                );
            }
        }
    }
}

#[test]
fn forward_transform_matches_quadrature_of_its_integrals() {
    // c = a int_0^1 e^{-bu} du, delta = -beta int_0^1 e^{-bu} du,
    // gamma = alpha - a beta int_0^1 int_0^u e^{-bv} dv du.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..25 {
        let p = common::random_params(&mut rng);
        let t = p.transformed();
        let w = quad::integrate(|u| (-p.b * u).exp(), 0.0, 1.0, 1e-13);
        let k = quad::integrate(
            |u| quad::integrate(move |v| (-p.b * v).exp(), 0.0, u, 1e-13),
            0.0,
            1.0,
            1e-13,
        );
        assert!((t.c - p.a * w).abs() <= 1e-11 * t.c.abs().max(1.0));
        assert!((t.delta + p.beta * w).abs() <= 1e-11 * t.delta.abs().max(1.0));
        assert!((t.gamma - (p.alpha - p.a * p.beta * k)).abs() <= 1e-11 * t.gamma.abs().max(1.0));
        assert!((t.d - (-p.b).exp()).abs() <= 1e-14);
    }
}

#[test]
fn one_step_mean_of_y_matches_conditional_expectation() {
    let p = reference_params();
    let t = p.transformed();
    let cfg = SimulationConfig {
        substeps: 16,
        seed: 500,
        scheme: Scheme::ExactCir,
    };
    for (case, y0) in [0.5, 1.5].into_iter().enumerate() {
        let cfg = SimulationConfig {
            seed: cfg.seed + case as u64,
            ..cfg
        };
        let draws = sample_unit_transitions(&p, y0, 30_000, &cfg).unwrap();
        let y1: Vec<f64> = draws.iter().map(|(y, _)| *y).collect();
        let (mean, se) = mean_and_se(&y1);
        let expected = t.d * y0 + t.c;
        assert!(
            (mean - expected).abs() <= 4.0 * se,
            "y0 = {y0}: mean {mean}, expected {expected}, se {se}"
        );
    }
}

#[test]
fn unit_mean_reversion_level_is_reached_in_expectation() {
    // a = b = 1, y0 = 1: E(Y_1) = e^{-1} y0 + (1 - e^{-1}) a/b = 1 exactly.
    let p = heston_clse::HestonParams::new(1.0, 1.0, 0.0, 0.0, 0.4, 0.3, 0.0, 1.0, 0.0).unwrap();
    let cfg = SimulationConfig {
        substeps: 16,
        seed: 550,
        scheme: Scheme::ExactCir,
    };
    let draws = sample_unit_transitions(&p, 1.0, 100_000, &cfg).unwrap();
    let y1: Vec<f64> = draws.iter().map(|(y, _)| *y).collect();
    let (mean, se) = mean_and_se(&y1);
    assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn one_step_mean_of_x_increment_matches_conditional_expectation() {
    let p = reference_params();
    let t = p.transformed();
    let cfg = SimulationConfig {
        substeps: 64,
        seed: 600,
        scheme: Scheme::ExactCir,
    };
    for (case, y0) in [0.5, 1.5].into_iter().enumerate() {
        let cfg = SimulationConfig {
            seed: cfg.seed + case as u64,
            ..cfg
        };
        let draws = sample_unit_transitions(&p, y0, 30_000, &cfg).unwrap();
        let dx: Vec<f64> = draws.iter().map(|(_, dx)| *dx).collect();
        let (mean, se) = mean_and_se(&dx);
        let expected = t.delta * y0 + t.gamma;
        assert!(
            (mean - expected).abs() <= 4.0 * se,
            "y0 = {y0}: mean {mean}, expected {expected}, se {se}"
        );
    }
}

#[test]
fn exact_and_euler_schemes_agree_at_integer_times() {
    // Marginal means and variances of (Y_2, X_2) from both schemes must
    // agree within Monte Carlo error; full truncation runs on a fine grid to
    // keep its discretization bias below the statistical noise.
    let p = reference_params();
    let paths = 20_000;
    let collect = |scheme: Scheme, substeps: u32, seed: u64| {
        let mut ys = Vec::with_capacity(paths);
        let mut xs = Vec::with_capacity(paths);
        for i in 0..paths {
            let cfg = SimulationConfig {
                substeps,
                seed: heston_clse::derive_seed(seed, i as u64),
                scheme,
            };
            let s = simulate_path(&p, 2, &cfg).unwrap();
            ys.push(s.y()[2]);
            xs.push(s.x()[2]);
        }
        (ys, xs)
    };
    let (y_exact, x_exact) = collect(Scheme::ExactCir, 64, 1000);
    let (y_euler, x_euler) = collect(Scheme::EulerFullTruncation, 512, 2000);

    for (name, a, b) in [("Y_2", &y_exact, &y_euler), ("X_2", &x_exact, &x_euler)] {
        let (ma, sa) = mean_and_se(a);
        let (mb, sb) = mean_and_se(b);
        let tol = 5.0 * (sa * sa + sb * sb).sqrt();
        assert!(
            (ma - mb).abs() <= tol,
            "{name} means: exact {ma}, euler {mb}, tol {tol}"
        );
        let va: Vec<f64> = a.iter().map(|v| (v - ma) * (v - ma)).collect();
        let vb: Vec<f64> = b.iter().map(|v| (v - mb) * (v - mb)).collect();
        let (mva, sva) = mean_and_se(&va);
        let (mvb, svb) = mean_and_se(&vb);
        let tol = 5.0 * (sva * sva + svb * svb).sqrt();
        assert!(
            (mva - mvb).abs() <= tol,
            "{name} variances: exact {mva}, euler {mvb}, tol {tol}"
        );
    }
}

#[test]
fn clse_equals_dense_qr_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for trial in 0..20 {
        let n = 10 + (trial * 47) % 990;
        let obs = random_series(&mut rng, n);
        let fast = clse_transformed(&obs).unwrap();
        let oracle = qr_least_squares(&obs);
        for (f, q) in fast.as_array().iter().zip(oracle.as_array()) {
            assert!(
                (f - q).abs() <= 1e-10 * q.abs().max(1.0),
                "trial {trial}: closed form {f} vs QR {q}"
            );
        }
    }
}

#[test]
fn clse_minimizes_the_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let p = reference_params();
    let obs = simulate_path(&p, 800, &SimulationConfig::default().with_seed(55)).unwrap();
    let fit = clse_transformed(&obs).unwrap();
    let at_fit = objective(&obs, &fit);
    for _ in 0..100 {
        use rand::Rng;
        let scale = if rng.random::<bool>() { 1e-3 } else { 0.3 };
        let perturbed = TransformedParams::new(
            fit.c + scale * rng.random_range(-1.0..1.0),
            fit.d + scale * rng.random_range(-1.0..1.0),
            fit.gamma + scale * rng.random_range(-1.0..1.0),
            fit.delta + scale * rng.random_range(-1.0..1.0),
        );
        assert!(at_fit <= objective(&obs, &perturbed));
    }
}

#[test]
fn noise_constants_survive_small_mean_reversion() {
    // The constants' direct closed forms cancel near b = 0; the series-backed
    // evaluation must track the quadrature oracle across the switch.
    let mut p = reference_params();
    for b in [1e-3, 3e-3, 0.01, 0.05, 0.2, 0.34, 0.36, 1.0, 2.5] {
        p = heston_clse::HestonParams::new(
            p.a, b, p.alpha, p.beta, p.sigma1, p.sigma2, p.rho, p.y0, p.x0,
        )
        .unwrap();
        let closed = heston_clse::noise_moments(&p).as_array();
        let oracle = heston_clse::noise_moments_quadrature(&p, 1e-13).as_array();
        for (k, (c, q)) in closed.iter().zip(&oracle).enumerate() {
            let rel = (c - q).abs() / c.abs();
            assert!(rel <= 1e-11, "C{} at b = {b}: rel {rel:.3e}", k + 1);
        }
    }
}
