//! Hawkes process model and a thinning simulator.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventSequence;
use crate::kernels::{stationarity_norm, CompositeKernel, StationarityOptions};

/// Background rate plus triggering kernel:
/// `λ(t) = μ + Σ_{tᵢ < t} φ(t − tᵢ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkesModel {
    pub mu: f64,
    pub kernel: CompositeKernel,
}

impl HawkesModel {
    pub fn new(mu: f64, kernel: CompositeKernel) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::param(format!("background rate must be positive, got {mu}")));
        }
        Ok(Self {
            mu,
            kernel: kernel.validated()?,
        })
    }

    /// Stationary mean rate `μ / (1 − ‖φ‖)`.
    pub fn mean_rate(&self) -> Result<f64> {
        let v = self.kernel.stationarity()?;
        if !v.stationary {
            return Err(Error::NonStationary(v.norm_value));
        }
        Ok(self.mu / (1.0 - v.norm_value))
    }
}

/// Conditional intensity at `t` given the history; events at `t` itself are
/// excluded (left-continuous intensity).
pub fn intensity_at(model: &HawkesModel, history: &EventSequence, t: f64) -> f64 {
    let times = history.times();
    let end = times.partition_point(|&u| u < t);
    model.mu + times[..end].iter().map(|&u| model.kernel.evaluate(t - u)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    /// Abort when the expected (or realized) count exceeds this.
    pub max_events: usize,
    /// Past events whose envelope falls below this are dropped.
    pub cutoff: f64,
    pub stationarity: StationarityOptions,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            max_events: 10_000_000,
            cutoff: 1e-9,
            stationarity: StationarityOptions::default(),
        }
    }
}

/// Simulates on `[0, horizon]` with default options.
pub fn simulate(model: &HawkesModel, horizon: f64, seed: u64) -> Result<EventSequence> {
    simulate_with(model, horizon, seed, &SimulationOptions::default())
}

/// Ogata thinning. The dominating rate after the current time is
/// `μ + Σ envelope(t − tᵢ)`, which is valid for every family because the
/// envelope is the running supremum of the kernel (SNS is non-monotone).
pub fn simulate_with(model: &HawkesModel, horizon: f64, seed: u64, opts: &SimulationOptions) -> Result<EventSequence> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::param(format!("horizon must be positive, got {horizon}")));
    }
    let verdict = stationarity_norm(&model.kernel, &opts.stationarity)?;
    if !verdict.stationary {
        return Err(Error::NonStationary(verdict.norm_value));
    }
    let expected = model.mu * horizon / (1.0 - verdict.norm_value);
    if expected > opts.max_events as f64 {
        return Err(Error::BlowUp {
            expected,
            cap: opts.max_events,
        });
    }

    let kernel = &model.kernel;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active: VecDeque<f64> = VecDeque::new();
    let mut times = Vec::new();
    let mut t = 0.0;
    loop {
        while let Some(&oldest) = active.front() {
            if kernel.envelope(t - oldest) < opts.cutoff {
                active.pop_front();
            } else {
                break;
            }
        }
        let bound = model.mu + active.iter().map(|&u| kernel.envelope(t - u)).sum::<f64>();
        let wait: f64 = rng.sample(Exp1);
        t += wait / bound;
        if t > horizon {
            break;
        }
        let rate = model.mu + active.iter().map(|&u| kernel.evaluate(t - u)).sum::<f64>();
        let u: f64 = rng.random();
        if u * bound <= rate {
            if times.last().is_some_and(|&last| last >= t) {
                // a zero wait under floating point; keep the process simple
                continue;
            }
            times.push(t);
            active.push_back(t);
            if times.len() > opts.max_events {
                return Err(Error::BlowUp {
                    expected: times.len() as f64,
                    cap: opts.max_events,
                });
            }
        }
    }
    EventSequence::new(times, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::BaseKernel;

    #[test]
    fn intensity_examples() {
        let m = HawkesModel::new(1.0, BaseKernel::exp(1.0, 1.0).unwrap().into()).unwrap();
        let empty = EventSequence::new(vec![], 5.0).unwrap();
        assert_eq!(intensity_at(&m, &empty, 2.0), 1.0);
        let h = EventSequence::new(vec![0.0], 5.0).unwrap();
        let v = intensity_at(&m, &h, 1.0);
        assert!((v - (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - 1.367_879_441_171_442).abs() < 1e-12);
        // the event at t itself is not counted
        assert_eq!(intensity_at(&m, &h, 0.0), 1.0);

        let m = HawkesModel::new(0.5, BaseKernel::sqr(1.0, 1.0).unwrap().into()).unwrap();
        assert_eq!(intensity_at(&m, &h, 2.0), 0.5);
    }

    #[test]
    fn deterministic_per_seed() {
        let m = HawkesModel::new(1.0, BaseKernel::sns(0.4, 2.0).unwrap().into()).unwrap();
        let a = simulate(&m, 200.0, 7).unwrap();
        let b = simulate(&m, 200.0, 7).unwrap();
        let c = simulate(&m, 200.0, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_non_stationary_and_blow_up() {
        let m = HawkesModel::new(1.0, BaseKernel::exp(2.0, 1.0).unwrap().into()).unwrap();
        assert!(matches!(simulate(&m, 10.0, 1), Err(Error::NonStationary(_))));
        let m = HawkesModel::new(1.0, BaseKernel::exp(0.5, 1.0).unwrap().into()).unwrap();
        let opts = SimulationOptions {
            max_events: 100,
            ..Default::default()
        };
        assert!(matches!(simulate_with(&m, 1000.0, 1, &opts), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn poisson_rate_when_kernel_negligible() {
        let m = HawkesModel::new(2.0, BaseKernel::exp(1e-10, 1.0).unwrap().into()).unwrap();
        let ev = simulate(&m, 10_000.0, 3).unwrap();
        let rate = ev.len() as f64 / 10_000.0;
        let sd = (2.0f64 / 10_000.0).sqrt();
        assert!((rate - 2.0).abs() < 3.0 * sd, "rate {rate}");
    }

    #[test]
    fn exponential_hawkes_mean_rate() {
        let m = HawkesModel::new(1.0, BaseKernel::exp(0.5, 1.0).unwrap().into()).unwrap();
        let ev = simulate(&m, 10_000.0, 11).unwrap();
        let rate = ev.len() as f64 / 10_000.0;
        // Var N(T) ≈ T μ / (1 − n)^3 for a Hawkes process
        let sd = (1.0f64 / 0.125 / 10_000.0).sqrt();
        assert!((rate - 2.0).abs() < 3.0 * sd, "rate {rate}, sd {sd}");
    }
}
