//! Test-side reference implementations, written independently of the
//! library: kernel formulas, adaptive Simpson quadrature and a direct
//! log-likelihood.

#![allow(dead_code)]

use std::f64::consts::PI;

use hawkes_decomp::kernels::{BaseKernel, CompositeKernel};

/// Base kernel value from its textbook formula.
pub fn base(k: &BaseKernel, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    match *k {
        BaseKernel::Exp { alpha, beta } => alpha * (-beta * t).exp(),
        BaseKernel::Pwl { k, c, p } => k / (c + t).powf(p),
        BaseKernel::Sqr { b, l } => {
            if t <= l {
                b
            } else {
                0.0
            }
        }
        BaseKernel::Sns { a, omega } => {
            if t <= PI / omega {
                a * (omega * t).sin()
            } else {
                0.0
            }
        }
    }
}

pub fn base_end(k: &BaseKernel) -> f64 {
    match *k {
        BaseKernel::Sqr { l, .. } => l,
        BaseKernel::Sns { omega, .. } => PI / omega,
        _ => f64::INFINITY,
    }
}

pub fn phi(k: &CompositeKernel, t: f64) -> f64 {
    match k {
        CompositeKernel::Single(a) => base(a, t),
        CompositeKernel::Sum(a, b) => base(a, t) + base(b, t),
        CompositeKernel::Product(a, b) => base(a, t) * base(b, t),
    }
}

/// Last point where the kernel can be nonzero.
pub fn end(k: &CompositeKernel) -> f64 {
    match k {
        CompositeKernel::Single(a) => base_end(a),
        CompositeKernel::Sum(a, b) => base_end(a).max(base_end(b)),
        CompositeKernel::Product(a, b) => base_end(a).min(base_end(b)),
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * eps {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Adaptive Simpson over `panels` equal pieces of `[a, b]`, each with
/// absolute tolerance `eps / panels`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, eps: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let e = eps / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == panels { b } else { lo + h };
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_rec(&f, lo, hi, fa, fm, fb, whole, e, 40)
        })
        .sum()
}

/// `∫₀^s φ` (with `s = ∞` allowed) to roughly `rel` relative accuracy.
/// Infinite ranges use `t = eˣ`; finite ones stop at the support end.
pub fn integral(k: &CompositeKernel, s: f64, rel: f64) -> f64 {
    let upper = s.min(end(k));
    if upper.is_finite() {
        let g = |t: f64| phi(k, t);
        let rough = simpson(g, 0.0, upper, 1e-6, 64).abs().max(1e-300);
        return simpson(g, 0.0, upper, rel * rough, 64);
    }
    let g = |x: f64| {
        let t = x.exp();
        phi(k, t) * t
    };
    let (lo, hi) = (-60.0, 60.0);
    let rough = simpson(g, lo, hi, 1e-6, 120).abs().max(1e-300);
    simpson(g, lo, hi, rel * rough, 120)
}

/// `Σ log λ(tᵢ) − ∫₀ᵀ λ`, with `λ` summed directly over the history and the
/// compensator integrated numerically per event.
pub fn log_likelihood(mu: f64, k: &CompositeKernel, times: &[f64], horizon: f64) -> f64 {
    let mut log_sum = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let lambda = mu + times[..i].iter().map(|&u| phi(k, t - u)).sum::<f64>();
        log_sum += lambda.ln();
    }
    let comp: f64 = times.iter().map(|&u| integral(k, horizon - u, 1e-12)).sum();
    log_sum - mu * horizon - comp
}
