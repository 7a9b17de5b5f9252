//! Mean rate, binned stationary covariance and the histogram horizon rule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventSequence;

/// Empirical covariance density on the lag grid `τⱼ = j·δ`.
///
/// With bin counts `Xᵢ` over `[iδ, (i+1)δ)` and `Λ̂ = N/T`,
/// `ν(τⱼ) = (1/T) Σᵢ (Xᵢ − Λ̂δ)(Xᵢ₊ⱼ − Λ̂δ)`. The bandwidth equals the bin
/// width, so the implied smoothing kernel is the triangle of half-width δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceGrid {
    pub values: Vec<f64>,
    pub delta: f64,
    pub h: f64,
    pub tau_max: f64,
    pub lambda_hat: f64,
}

impl CovarianceGrid {
    pub fn lag_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |j| j as f64 * self.delta)
    }
}

/// `N(T) / T`.
pub fn estimate_lambda(events: &EventSequence) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::sequence("no events: rate is not estimable"));
    }
    Ok(events.len() as f64 / events.horizon())
}

/// `floor(a / b)` that tolerates representation error in exact ratios.
pub(crate) fn grid_count(a: f64, b: f64) -> usize {
    let r = a / b;
    let n = r.round();
    if (r - n).abs() < 1e-9 * n.max(1.0) {
        n as usize
    } else {
        r.floor() as usize
    }
}

/// Bin counts with the mean removed, `Xᵢ − Λ̂δ` for `i < floor(T/δ)`.
fn centered_counts(events: &EventSequence, delta: f64, lambda: f64) -> Vec<f64> {
    let bins = grid_count(events.horizon(), delta);
    let mut counts = vec![0.0; bins];
    for &t in events.times() {
        let i = (t / delta).floor() as usize;
        if i < bins {
            counts[i] += 1.0;
        }
    }
    let mean = lambda * delta;
    counts.iter_mut().for_each(|c| *c -= mean);
    counts
}

fn lag_value(y: &[f64], lag: usize, horizon: f64) -> f64 {
    y.iter().zip(&y[lag..]).map(|(a, b)| a * b).sum::<f64>() / horizon
}

/// Covariance on `floor(tau_max/δ)` lags; lags whose window would run past
/// the horizon are dropped. Lags are evaluated in parallel.
pub fn covariance_grid(events: &EventSequence, delta: f64, tau_max: f64) -> Result<CovarianceGrid> {
    covariance_grid_impl(events, delta, tau_max, true)
}

/// Same as [`covariance_grid`] but evaluates lags one after another.
pub fn covariance_grid_sequential(events: &EventSequence, delta: f64, tau_max: f64) -> Result<CovarianceGrid> {
    covariance_grid_impl(events, delta, tau_max, false)
}

fn covariance_grid_impl(events: &EventSequence, delta: f64, tau_max: f64, parallel: bool) -> Result<CovarianceGrid> {
    if events.len() < 2 {
        return Err(Error::sequence("covariance needs at least two events"));
    }
    let horizon = events.horizon();
    if !(delta > 0.0 && delta < tau_max && tau_max <= horizon) {
        return Err(Error::param(format!(
            "need 0 < delta < tau_max <= T, got delta={delta}, tau_max={tau_max}, T={horizon}"
        )));
    }
    let lambda_hat = estimate_lambda(events)?;
    let y = centered_counts(events, delta, lambda_hat);
    let lags = grid_count(tau_max, delta).min(y.len());
    let values = if parallel {
        (0..lags).into_par_iter().map(|j| lag_value(&y, j, horizon)).collect()
    } else {
        (0..lags).map(|j| lag_value(&y, j, horizon)).collect()
    };
    Ok(CovarianceGrid {
        values,
        delta,
        h: delta,
        tau_max,
        lambda_hat,
    })
}

/// Number of bins in the inter-event histogram.
pub const HISTOGRAM_BINS: usize = 100;

/// Horizon from the inter-event histogram: the upper edge of the first of
/// 100 equal bins (spanning `[min, max]` of the intervals) whose cumulative
/// mass strictly exceeds `percentile`.
pub fn horizon_from_histogram(events: &EventSequence, percentile: f64) -> Result<f64> {
    if events.len() < 2 {
        return Err(Error::sequence("histogram horizon needs at least two events"));
    }
    horizon_from_intervals(&events.intervals(), percentile)
}

pub fn horizon_from_intervals(intervals: &[f64], percentile: f64) -> Result<f64> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(Error::param(format!("percentile must lie in (0, 1), got {percentile}")));
    }
    let max = intervals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = intervals.iter().copied().fold(f64::INFINITY, f64::min);
    if intervals.is_empty() || !(max > 0.0) {
        return Err(Error::sequence("degenerate sequence: all intervals are zero"));
    }
    // a single distinct value gets the range [0, max]
    let lo = if max > min { min } else { 0.0 };
    let width = (max - lo) / HISTOGRAM_BINS as f64;
    let mut hist = [0usize; HISTOGRAM_BINS];
    for &v in intervals {
        let i = (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        hist[i] += 1;
    }
    let total = intervals.len() as f64;
    let mut cumulative = 0usize;
    for (i, &count) in hist.iter().enumerate() {
        cumulative += count;
        if cumulative as f64 / total > percentile {
            return Ok(lo + width * (i + 1) as f64);
        }
    }
    Ok(max)
}
