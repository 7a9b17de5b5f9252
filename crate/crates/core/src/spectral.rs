//! Nonparametric kernel estimate from the covariance grid.
//!
//! The spectrum of the binned covariance factors as
//! `ν̂(ω) = Λ ĝ(ω) |1 + ψ̂(ω)|²`, with `1 + ψ̂ = 1 / (1 − φ̂)`. The modulus of
//! `1 − φ̂` follows directly; its phase is recovered from the log-modulus by a
//! Hilbert transform (minimum-phase reconstruction), giving
//! `φ̂(ω) = 1 − exp(−log|1+ψ̂| + i·H(log|1+ψ̂|))`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceGrid;
use crate::error::{Error, Result};
use crate::likelihood::Triggering;

/// Sampled kernel estimate `φ̂(jδ)`, `j = 0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub values: Vec<f64>,
    pub delta: f64,
    pub tau_max: f64,
}

impl KernelEstimate {
    pub fn new(values: Vec<f64>, delta: f64, tau_max: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSpectrum("non-finite kernel estimate".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::param(format!("grid step must be positive, got {delta}")));
        }
        Ok(Self { values, delta, tau_max })
    }

    /// Estimate sampled from a parametric kernel, mainly for tests.
    pub fn from_fn(f: impl Fn(f64) -> f64, delta: f64, len: usize) -> Result<Self> {
        let values = (0..len).map(|j| f(j as f64 * delta)).collect();
        Self::new(values, delta, len as f64 * delta)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|j| j as f64 * self.delta).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoid integral of `max(φ̂, 0)` over the grid.
    pub fn clamped_integral(&self) -> f64 {
        let v: Vec<f64> = self.values.iter().map(|x| x.max(0.0)).collect();
        trapezoid(&v, self.delta)
    }
}

fn trapezoid(v: &[f64], h: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
}

/// Fourier transform of the triangle `(1 − |t|/h)⁺`:
/// `4 sin²(ωh/2) / (ω² h)`, equal to `h` at `ω = 0`.
pub fn triangular_g_spectrum(omega: f64, h: f64) -> f64 {
    let x = 0.5 * omega * h;
    if x.abs() < 1e-6 {
        return h * (1.0 - x * x / 3.0);
    }
    4.0 * (x.sin()).powi(2) / (omega * omega * h)
}

/// Transform of the triangle sampled on the grid `jδ`, i.e. the sum of
/// [`triangular_g_spectrum`] over all aliases `ω + 2πm/δ`. For `h = δ` only
/// the centre sample is non-zero and the result is exactly `h`.
pub fn periodized_g_spectrum(omega: f64, h: f64, delta: f64) -> f64 {
    let reach = (h / delta).ceil() as i64;
    let mut acc = 0.0;
    for j in -reach..=reach {
        let t = j as f64 * delta;
        let w = 1.0 - t.abs() / h;
        if w > 0.0 {
            acc += w * (omega * t).cos();
        }
    }
    delta * acc
}

struct Transforms {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl Transforms {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            n,
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the `1/n` normalization.
    fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }
}

fn hilbert_with(plan: &Transforms, samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    plan.forward(&mut buf);
    // multiply by −i·sgn(k); DC and (for even n) Nyquist are annihilated
    for (k, z) in buf.iter_mut().enumerate() {
        let twice = 2 * k;
        *z = if k == 0 || twice == n {
            Complex64::new(0.0, 0.0)
        } else if twice < n {
            Complex64::new(z.im, -z.re)
        } else {
            Complex64::new(-z.im, z.re)
        };
    }
    plan.inverse(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

/// Discrete Hilbert transform through the frequency-domain multiplier
/// `−i·sgn(k)`. Maps `cos` to `sin` over whole periods.
pub fn hilbert_transform(samples: &[f64]) -> Vec<f64> {
    if samples.len() < 2 {
        return vec![0.0; samples.len()];
    }
    hilbert_with(&Transforms::new(samples.len()), samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    /// `|1+ψ̂|²` is clamped below at this fraction of its maximum.
    pub floor: f64,
    /// The symmetrized covariance is zero-padded to the next power of two at
    /// least this many times the grid length.
    pub padding: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            floor: 1e-8,
            padding: 4,
        }
    }
}

pub fn invert_to_kernel(grid: &CovarianceGrid) -> Result<KernelEstimate> {
    invert_to_kernel_with(grid, &InversionOptions::default())
}

pub fn invert_to_kernel_with(grid: &CovarianceGrid, opts: &InversionOptions) -> Result<KernelEstimate> {
    let lags = grid.values.len();
    if lags == 0 {
        return Err(Error::param("empty covariance grid"));
    }
    if !(grid.lambda_hat > 0.0) {
        return Err(Error::param(format!(
            "mean rate must be positive, got {}",
            grid.lambda_hat
        )));
    }
    let n = (opts.padding.max(1) * lags).next_power_of_two().max(4);
    let plan = Transforms::new(n);

    // symmetric covariance on the circle: ν(−τ) = ν(τ)
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (j, &v) in grid.values.iter().enumerate() {
        buf[j].re = v;
        if j > 0 {
            buf[n - j].re = v;
        }
    }
    plan.forward(&mut buf);

    let delta = grid.delta;
    let mut power: Vec<f64> = buf
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / (n as f64 * delta);
            delta * z.re / (grid.lambda_hat * periodized_g_spectrum(omega, grid.h, delta))
        })
        .collect();
    let peak = power.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::DegenerateSpectrum(format!(
            "spectrum has no positive component (max {peak})"
        )));
    }
    let floor = opts.floor * peak;
    power.iter_mut().for_each(|p| *p = p.max(floor));

    // log|1 + ψ̂| and its Hilbert transform give 1 − φ̂ as a minimum-phase factor
    let log_mod: Vec<f64> = power.iter().map(|p| 0.5 * p.ln()).collect();
    let phase = hilbert_with(&plan, &log_mod);
    let mut one_minus: Vec<Complex64> = log_mod
        .iter()
        .zip(&phase)
        .map(|(&m, &h)| Complex64::new(-m, h).exp())
        .collect();
    plan.inverse(&mut one_minus);

    let values = one_minus
        .iter()
        .take(lags)
        .enumerate()
        .map(|(j, z)| {
            let impulse = if j == 0 { 1.0 } else { 0.0 };
            (impulse - z.re) / delta
        })
        .collect();
    KernelEstimate::new(values, delta, grid.tau_max)
}

/// The estimate used as a kernel: clamped at zero, linear between grid
/// points, zero past the last one.
#[derive(Debug, Clone)]
pub struct TabulatedKernel {
    values: Vec<f64>,
    delta: f64,
    cumulative: Vec<f64>,
}

impl TabulatedKernel {
    pub fn from_estimate(est: &KernelEstimate) -> Self {
        let values: Vec<f64> = est.values.iter().map(|v| v.max(0.0)).collect();
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        for j in 0..values.len() {
            if j > 0 {
                acc += 0.5 * est.delta * (values[j - 1] + values[j]);
            }
            cumulative.push(acc);
        }
        Self {
            values,
            delta: est.delta,
            cumulative,
        }
    }

    fn end(&self) -> f64 {
        (self.values.len().max(1) - 1) as f64 * self.delta
    }

    pub fn mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

impl Triggering for TabulatedKernel {
    fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.end() || self.values.len() < 2 {
            return 0.0;
        }
        let x = t / self.delta;
        let j = (x.floor() as usize).min(self.values.len() - 2);
        let frac = x - j as f64;
        self.values[j] * (1.0 - frac) + self.values[j + 1] * frac
    }

    fn cumulative(&self, s: f64) -> f64 {
        if s <= 0.0 || self.values.len() < 2 {
            return 0.0;
        }
        if s >= self.end() {
            return self.mass();
        }
        let x = s / self.delta;
        let j = (x.floor() as usize).min(self.values.len() - 2);
        let frac = x - j as f64;
        let v0 = self.values[j];
        let v1 = self.values[j + 1];
        self.cumulative[j] + self.delta * frac * (v0 + 0.5 * frac * (v1 - v0))
    }

    fn horizon(&self, _tol: f64) -> f64 {
        self.end()
    }
}
