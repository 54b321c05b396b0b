//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 15-point Kronrod rule with embedded 7-point Gauss rule, bisected
//! adaptively until the Kronrod/Gauss discrepancy falls under the requested
//! absolute tolerance. This is the independent oracle used to check the
//! closed-form noise-moment constants: the iterated integrals are evaluated
//! by nesting one-dimensional passes, so the integrator has to be cheap and
//! re-entrant.

/// Kronrod abscissae on [0, 1] (positive half; the rule is symmetric).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// Weights of the 7-point Gauss rule (odd Kronrod abscissae).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Weights of the 15-point Kronrod rule.
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const MAX_DEPTH: u32 = 40;

/// One 15-point Kronrod panel; returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;

    for j in 0..7 {
        let x = half * XGK[j];
        let pair = f(center - x) + f(center + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            // XGK[1], XGK[3], XGK[5] are the Gauss abscissae.
            gauss += WG[j / 2] * pair;
        }
    }

    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= abs_tol || depth >= MAX_DEPTH || (b - a).abs() < f64::EPSILON * a.abs().max(1.0) {
        return value;
    }
    let mid = 0.5 * (a + b);
    let half_tol = 0.5 * abs_tol;
    adapt(f, a, mid, half_tol, depth + 1) + adapt(f, mid, b, half_tol, depth + 1)
}

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&f, a, b, abs_tol.max(f64::MIN_POSITIVE), 0)
}

/// Integrate with known interior breakpoints (e.g. a kink from `min(u, v)`).
///
/// Each breakpoint inside `(a, b)` starts a fresh panel so the adaptive rule
/// never straddles the non-smooth point.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    abs_tol: f64,
) -> f64 {
    let mut edges: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b)
        .collect();
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
    edges.dedup();

    let mut total = 0.0;
    let mut lo = a;
    let per_panel_tol = abs_tol / (edges.len() + 1) as f64;
    for &p in &edges {
        total += adapt(&f, lo, p, per_panel_tol.max(f64::MIN_POSITIVE), 0);
        lo = p;
    }
    total + adapt(&f, lo, b, per_panel_tol.max(f64::MIN_POSITIVE), 0)
}
