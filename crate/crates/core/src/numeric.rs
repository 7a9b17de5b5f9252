//! Special functions and adaptive quadrature used by the closed-form
//! kernel integrals.

/// Scaled upper incomplete gamma `e^x · x^(-a) · Γ(a, x)` for `x > 0`.
///
/// Valid for any real `a < 1`, including negative integers, which is the
/// range needed by `Γ(1 - p, ·)` with `p > 1`. Scaling keeps the value finite
/// where `Γ(a, x)` underflows (large `x`) or overflows (tiny `x`, `a < 0`).
pub fn upper_gamma_scaled(a: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0 && a < 1.0);
    if x >= 1.0 {
        upper_gamma_cf(a, x)
    } else {
        // Γ(a, x) = Γ(a, 1) + ∫_x^1 t^(a-1) e^(-t) dt, expanding e^(-t).
        // Each term is multiplied through by x^(-a) to avoid overflow.
        let head = x.powf(-a) * (-1.0f64).exp() * upper_gamma_cf(a, 1.0);
        let ln_x = x.ln();
        let mut sum = 0.0;
        let mut inv_fact = 1.0;
        for k in 0..200 {
            let m = a + k as f64;
            let piece = if m.abs() < 0.5 {
                // x^(-a) (1 - x^m) / m, stable as m -> 0
                let ratio = if m == 0.0 { -ln_x } else { -(m * ln_x).exp_m1() / m };
                x.powf(-a) * ratio
            } else {
                (x.powf(-a) - x.powi(k)) / m
            };
            let term = if k % 2 == 0 {
                inv_fact * piece
            } else {
                -inv_fact * piece
            };
            sum += term;
            inv_fact /= (k + 1) as f64;
            if k > 2 && term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        x.exp() * (head + sum)
    }
}

/// Lentz evaluation of the continued fraction for `Γ(a, x) e^x x^(-a)`.
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..100_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature on `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol·|I|)` or 2000 panels are used.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (v, e) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut total = v;
    let mut total_err = e;
    while total_err > abs_tol.max(rel_tol * total.abs()) && panels.len() < 2000 {
        let (idx, _) =
            panels.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (i, p)| {
                    if p.3 > best.1 {
                        (i, p.3)
                    } else {
                        best
                    }
                },
            );
        let (lo, hi, pv, pe) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let left = gk15(&f, lo, mid);
        let right = gk15(&f, mid, hi);
        total += left.0 + right.0 - pv;
        total_err += left.1 + right.1 - pe;
        panels.push((lo, mid, left.0, left.1));
        panels.push((mid, hi, right.0, right.1));
    }
    // re-sum to shed the drift of incremental updates
    panels.iter().map(|p| p.2).sum()
}

/// Integral over `[a, ∞)` through the map `x = a + u / (1 - u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate(
        |u| {
            let w = 1.0 - u;
            f(a + u / w) / (w * w)
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}
