//! Point-process log-likelihood with closed-form compensators, plus the
//! time-rescaling residuals used for goodness-of-fit checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::events::EventSequence;
use crate::kernels::{BaseKernel, CompositeKernel};
use crate::numeric;
use crate::simulate::HawkesModel;

/// Anything usable as a triggering kernel inside an intensity.
pub trait Triggering {
    /// `φ(t)`, zero for negative lags.
    fn value(&self, t: f64) -> f64;
    /// `Φ(s) = ∫₀^s φ(u) du`; `s` may be infinite.
    fn cumulative(&self, s: f64) -> f64;
    /// Lag beyond which `φ` stays below `tol`.
    fn horizon(&self, tol: f64) -> f64;
}

impl Triggering for CompositeKernel {
    fn value(&self, t: f64) -> f64 {
        self.evaluate(t)
    }

    fn cumulative(&self, s: f64) -> f64 {
        kernel_cumulative(self, s)
    }

    fn horizon(&self, tol: f64) -> f64 {
        self.effective_horizon(tol)
    }
}

/// `K (c^{1-p} - (c+s)^{1-p}) / (p-1)` without cancellation at small `s`.
fn power_law_mass(k: f64, c: f64, p: f64, s: f64) -> f64 {
    if s.is_infinite() {
        return k * c.powf(1.0 - p) / (p - 1.0);
    }
    -k * c.powf(1.0 - p) * ((1.0 - p) * (s / c).ln_1p()).exp_m1() / (p - 1.0)
}

fn base_cumulative(k: &BaseKernel, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    match *k {
        BaseKernel::Exp { alpha, beta } => -alpha / beta * (-beta * s).exp_m1(),
        BaseKernel::Pwl { k, c, p } => power_law_mass(k, c, p, s),
        BaseKernel::Sqr { b, l } => b * s.min(l),
        BaseKernel::Sns { a, omega } => a / omega * (1.0 - (omega * s.min(PI / omega)).cos()),
    }
}

/// `sin(d x) / d`, continuous at `d = 0`.
fn sin_over(d: f64, x: f64) -> f64 {
    let z = d * x;
    if z.abs() < 1e-4 {
        x * (1.0 - z * z / 6.0 + z.powi(4) / 120.0)
    } else {
        z.sin() / d
    }
}

fn product_cumulative(a: &BaseKernel, b: &BaseKernel, s: f64) -> f64 {
    use BaseKernel::*;
    let (x, y) = if a.family() <= b.family() { (a, b) } else { (b, a) };
    let s = s.min(x.support_end()).min(y.support_end());
    if s <= 0.0 {
        return 0.0;
    }
    match (*x, *y) {
        (Exp { alpha: a1, beta: b1 }, Exp { alpha: a2, beta: b2 }) => {
            let beta = b1 + b2;
            -a1 * a2 / beta * (-beta * s).exp_m1()
        }
        (Exp { alpha, beta }, Pwl { k, c, p }) => {
            // αK e^{βc} β^{p-1} [Γ(1-p, βc) - Γ(1-p, β(c+s))] in scaled form
            let a_ = 1.0 - p;
            let head = numeric::upper_gamma_scaled(a_, beta * c);
            let tail = if s.is_infinite() {
                0.0
            } else {
                (-beta * s + a_ * (s / c).ln_1p()).exp() * numeric::upper_gamma_scaled(a_, beta * (c + s))
            };
            alpha * k * c.powf(a_) * (head - tail)
        }
        (Exp { alpha, beta }, Sqr { b, .. }) => -alpha * b / beta * (-beta * s).exp_m1(),
        (Exp { alpha, beta }, Sns { a, omega }) => {
            let damp = (-beta * s).exp();
            a * alpha * (omega - damp * (beta * (omega * s).sin() + omega * (omega * s).cos()))
                / (beta * beta + omega * omega)
        }
        (Pwl { .. }, Pwl { .. }) | (Pwl { .. }, Sns { .. }) => {
            let f = |t: f64| x.evaluate(t) * y.evaluate(t);
            if s.is_infinite() {
                numeric::integrate_to_infinity(f, 0.0, 1e-15, 1e-12)
            } else {
                numeric::integrate(f, 0.0, s, 1e-15, 1e-12)
            }
        }
        (Pwl { k, c, p }, Sqr { b, .. }) => power_law_mass(k * b, c, p, s),
        (Sqr { b: b1, .. }, Sqr { b: b2, .. }) => b1 * b2 * s,
        (Sqr { b, .. }, Sns { a, omega }) => a * b / omega * (1.0 - (omega * s).cos()),
        (Sns { a: a1, omega: w1 }, Sns { a: a2, omega: w2 }) => {
            0.5 * a1 * a2 * (sin_over(w1 - w2, s) - sin_over(w1 + w2, s))
        }
        _ => unreachable!("pair is ordered by family"),
    }
}

/// Compensator of a single kernel, `Φ(s) = ∫₀^s φ(u) du`.
///
/// Closed forms for every base kernel and for most products; PWL×PWL and
/// PWL×SNS fall back to adaptive quadrature (relative tolerance 1e-12).
pub fn kernel_cumulative(kernel: &CompositeKernel, s: f64) -> f64 {
    match kernel {
        CompositeKernel::Single(k) => base_cumulative(k, s),
        CompositeKernel::Sum(a, b) => base_cumulative(a, s) + base_cumulative(b, s),
        CompositeKernel::Product(a, b) => product_cumulative(a, b, s),
    }
}

/// Exact total mass `∫₀^∞ φ` (quadrature for the bound-only products).
pub fn kernel_mass(kernel: &CompositeKernel) -> f64 {
    kernel_cumulative(kernel, f64::INFINITY)
}

/// Log-likelihood of an event sequence under a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLikelihood {
    /// Nats; `-∞` when some intensity at an event is not positive.
    #[serde(with = "crate::io::nonfinite")]
    pub value: f64,
    pub n_events: usize,
    pub horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
}

impl LogLikelihood {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Relative truncation used when summing past contributions.
const TRUNCATION: f64 = 1e-12;

/// Left-limit intensities `λ(tᵢ) = μ + Σ_{tⱼ < tᵢ} φ(tᵢ - tⱼ)` at every event.
pub fn event_intensities<K: Triggering>(mu: f64, kernel: &K, times: &[f64]) -> Vec<f64> {
    let reach = kernel.horizon(TRUNCATION * mu);
    let mut lo = 0;
    let mut out = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        while lo < i && t - times[lo] > reach {
            lo += 1;
        }
        let excitation: f64 = times[lo..i].iter().map(|&u| kernel.value(t - u)).sum();
        out.push(mu + excitation);
    }
    out
}

/// `l = Σ log λ(tᵢ) − ∫₀^T λ(u) du`.
pub fn log_likelihood(model: &HawkesModel, events: &EventSequence) -> LogLikelihood {
    log_likelihood_with(model.mu, &model.kernel, events, 0.0)
}

/// Log-likelihood of the events after `start`, conditioning on the ones
/// before it: `Σ_{tᵢ > start} log λ(tᵢ) − ∫_start^T λ`.
pub fn log_likelihood_after(model: &HawkesModel, events: &EventSequence, start: f64) -> LogLikelihood {
    log_likelihood_with(model.mu, &model.kernel, events, start)
}

/// Generic form of [`log_likelihood_after`] for any triggering kernel.
pub fn log_likelihood_with<K: Triggering>(mu: f64, kernel: &K, events: &EventSequence, start: f64) -> LogLikelihood {
    let times = events.times();
    let horizon = events.horizon();
    let first = times.partition_point(|&t| t <= start);
    let n_events = times.len() - first;
    let sentinel = |diagnostic: String| LogLikelihood {
        value: f64::NEG_INFINITY,
        n_events,
        horizon,
        diagnostic: Some(diagnostic),
    };
    if !(mu > 0.0) {
        return sentinel(format!("background rate {mu} is not positive"));
    }
    let lambdas = event_intensities(mu, kernel, times);
    let mut log_sum = 0.0;
    for (i, &lam) in lambdas.iter().enumerate().skip(first) {
        if !(lam > 0.0) || !lam.is_finite() {
            return sentinel(format!("intensity {lam} at event {i} (t = {})", times[i]));
        }
        log_sum += lam.ln();
    }
    let mut compensator = mu * (horizon - start);
    for &u in times {
        compensator += kernel.cumulative(horizon - u);
        if u < start {
            compensator -= kernel.cumulative(start - u);
        }
    }
    LogLikelihood {
        value: log_sum - compensator,
        n_events,
        horizon,
        diagnostic: None,
    }
}

/// Time-rescaled inter-event increments `Λ(tᵢ) − Λ(tᵢ₋₁)` (with `t₀ = 0`),
/// which are unit exponential when the model is correct.
pub fn compensator_increments<K: Triggering>(mu: f64, kernel: &K, times: &[f64]) -> Vec<f64> {
    let reach = kernel.horizon(TRUNCATION * mu.max(f64::MIN_POSITIVE));
    let mut lo = 0;
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        while lo < i && prev - times[lo] > reach {
            lo += 1;
        }
        let mut inc = mu * (t - prev);
        for &u in &times[lo..i] {
            inc += kernel.cumulative(t - u) - kernel.cumulative(prev - u);
        }
        out.push(inc);
        prev = t;
    }
    out
}

/// One-sample Kolmogorov–Smirnov test against the unit exponential.
/// Returns `(D, p-value)` using the asymptotic Kolmogorov distribution.
pub fn ks_unit_exponential(samples: &[f64]) -> (f64, f64) {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = -(-x).exp_m1();
        d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
    }
    let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_survival(lam))
}

fn kolmogorov_survival(lam: f64) -> f64 {
    if lam < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lam * lam).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
