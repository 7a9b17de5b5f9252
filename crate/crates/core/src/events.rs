//! Ordered event timestamps observed on `[0, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A realization of a simple point process on `[0, horizon]`.
///
/// Timestamps are strictly increasing and lie inside the observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    times: Vec<f64>,
    horizon: f64,
}

impl EventSequence {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::sequence(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 || t > horizon {
                return Err(Error::sequence(format!(
                    "timestamp {t} at index {i} lies outside [0, {horizon}]"
                )));
            }
            if i > 0 && t <= times[i - 1] {
                return Err(Error::sequence(format!(
                    "timestamps must be strictly increasing (index {i}: {} then {t})",
                    times[i - 1]
                )));
            }
        }
        Ok(Self { times, horizon })
    }

    /// Builds a sequence whose horizon is the last timestamp.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        let horizon = times.last().copied().unwrap_or(0.0);
        Self::new(times, horizon)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Successive inter-event intervals (`len() - 1` values).
    pub fn intervals(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Multiplies every timestamp and the horizon by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.times.iter().map(|t| t * factor).collect(), self.horizon * factor)
    }
}

/// How the held-out part of a split sequence is positioned in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitTime {
    /// The test part starts at 0 (timestamps shifted by the split time).
    #[default]
    Shifted,
    /// The test part keeps absolute timestamps and the full horizon. Scoring
    /// it conditions on the training history over the window `(split, T]`.
    Absolute,
}

/// Splits into the first `ceil(fraction * n)` events and the remainder.
///
/// The training part ends at the split time, which is the timestamp of its
/// last event.
pub fn train_test_split(
    events: &EventSequence,
    fraction: f64,
    mode: SplitTime,
) -> Result<(EventSequence, EventSequence)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = events.len();
    let n_train = (fraction * n as f64).ceil() as usize;
    if n < 2 || n_train == 0 || n_train >= n {
        return Err(Error::sequence(format!(
            "{n} events cannot be split at fraction {fraction} into two non-empty parts"
        )));
    }
    let times = events.times();
    let split = times[n_train - 1];
    let train = EventSequence::new(times[..n_train].to_vec(), split)?;
    let test = match mode {
        SplitTime::Shifted => EventSequence::new(
            times[n_train..].iter().map(|t| t - split).collect(),
            events.horizon() - split,
        )?,
        SplitTime::Absolute => EventSequence::new(times[n_train..].to_vec(), events.horizon())?,
    };
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(n: usize) -> EventSequence {
        EventSequence::new((1..=n).map(|i| i as f64).collect(), n as f64 + 1.0).unwrap()
    }

    #[test]
    fn rejects_unordered_and_out_of_window() {
        assert!(EventSequence::new(vec![1.0, 1.0], 2.0).is_err());
        assert!(EventSequence::new(vec![2.0, 1.0], 3.0).is_err());
        assert!(EventSequence::new(vec![1.0, 4.0], 3.0).is_err());
        assert!(EventSequence::new(vec![-0.5], 3.0).is_err());
        assert!(EventSequence::new(vec![], 0.0).is_err());
    }

    #[test]
    fn split_ten_at_eighty_percent() {
        let (train, test) = train_test_split(&seq(10), 0.8, SplitTime::Shifted).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
        assert_eq!(train.horizon(), 8.0);
        assert_eq!(test.times(), &[1.0, 2.0]);
        assert_eq!(test.horizon(), 3.0);
    }

    #[test]
    fn split_uses_ceiling() {
        let (train, test) = train_test_split(&seq(5), 0.5, SplitTime::Absolute).unwrap();
        assert_eq!(train.len(), 3);
        assert_eq!(test.len(), 2);
        assert_eq!(test.times(), &[4.0, 5.0]);
    }

    #[test]
    fn split_single_event_fails() {
        assert!(train_test_split(&seq(1), 0.5, SplitTime::Shifted).is_err());
        assert!(train_test_split(&seq(10), 1.0, SplitTime::Shifted).is_err());
    }
}
