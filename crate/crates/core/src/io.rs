//! File formats: event CSVs, tick series ingestion, grids, configuration.
//!
//! Event files hold a header line `t` and one timestamp per line. An
//! optional `# horizon: T` line before the header records an observation
//! window longer than the last event.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceGrid;
use crate::error::{Error, Result};
use crate::events::{EventSequence, SplitTime};
use crate::search::DecomposeConfig;
use crate::spectral::KernelEstimate;

/// Serializes non-finite floats as `null` (JSON has no infinities) and reads
/// `null` back as `-∞`.
pub mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    }
}

/// Data rows of a CSV with a single header line, split on commas.
/// Comment lines starting with `#` and blank lines are skipped.
fn csv_rows<'a>(
    path: &'a Path,
    text: &'a str,
    header: &[&str],
) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)> + 'a> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (n, head) = lines.next().ok_or_else(|| parse_error(path, 1, "missing header"))?;
    let got: Vec<&str> = head.split(',').map(str::trim).collect();
    if got != header {
        return Err(parse_error(
            path,
            n,
            format!("expected header {:?}, got {:?}", header.join(","), head),
        ));
    }
    Ok(lines.map(|(n, l)| (n, l.split(',').map(str::trim).collect())))
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|e| parse_error(path, line, format!("{field:?}: {e}")))
}

fn horizon_comment(text: &str) -> Option<&str> {
    text.lines()
        .map(str::trim)
        .take_while(|l| l.is_empty() || l.starts_with('#'))
        .find_map(|l| l.trim_start_matches('#').trim().strip_prefix("horizon:"))
        .map(str::trim)
}

/// Parses an event CSV. The horizon is the `# horizon:` value when present,
/// the last timestamp otherwise.
pub fn parse_events(path: &Path, text: &str) -> Result<EventSequence> {
    let mut times = Vec::new();
    for (line, fields) in csv_rows(path, text, &["t"])? {
        if fields.len() != 1 {
            return Err(parse_error(path, line, "expected one column"));
        }
        times.push(parse_f64(path, line, fields[0])?);
    }
    let seq = match horizon_comment(text) {
        Some(h) => EventSequence::new(times, parse_f64(path, 1, h)?),
        None => EventSequence::from_times(times),
    };
    seq.map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_events(path: &Path) -> Result<EventSequence> {
    parse_events(path, &read_text(path)?)
}

/// Event CSV text; the horizon comment is written only when the horizon
/// extends past the last event.
pub fn format_events(events: &EventSequence) -> String {
    let mut out = String::new();
    let last = events.times().last().copied().unwrap_or(0.0);
    if events.horizon() > last {
        let _ = writeln!(out, "# horizon: {}", events.horizon());
    }
    out.push_str("t\n");
    for t in events.times() {
        let _ = writeln!(out, "{t}");
    }
    out
}

pub fn write_events(path: &Path, events: &EventSequence) -> Result<()> {
    write_text(path, &format_events(events))
}

pub fn format_covariance(grid: &CovarianceGrid) -> String {
    let mut out = String::from("lag_time,nu_value\n");
    for (t, v) in grid.lag_times().zip(&grid.values) {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

pub fn format_estimate(estimate: &KernelEstimate) -> String {
    let mut out = String::from("t,phi_hat\n");
    for (t, v) in estimate.times().iter().zip(&estimate.values) {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

/// Reads a `t,phi_hat` grid; the step is taken from the first two rows.
pub fn read_estimate(path: &Path) -> Result<KernelEstimate> {
    let text = read_text(path)?;
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (line, fields) in csv_rows(path, &text, &["t", "phi_hat"])? {
        if fields.len() != 2 {
            return Err(parse_error(path, line, "expected two columns"));
        }
        t.push(parse_f64(path, line, fields[0])?);
        v.push(parse_f64(path, line, fields[1])?);
    }
    if t.len() < 2 {
        return Err(parse_error(path, 1, "need at least two grid points"));
    }
    let delta = t[1] - t[0];
    let len = v.len();
    KernelEstimate::new(v, delta, len as f64 * delta)
}

/// Timestamped prices or magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct TickSeries {
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
}

impl TickSeries {
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::sequence("timestamps and values differ in length"));
        }
        if timestamps.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::sequence("tick timestamps must be nondecreasing"));
        }
        if timestamps.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::sequence("tick series contains non-finite values"));
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Reads a `timestamp,value` CSV.
pub fn read_ticks(path: &Path) -> Result<TickSeries> {
    let text = read_text(path)?;
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (line, fields) in csv_rows(path, &text, &["timestamp", "value"])? {
        if fields.len() != 2 {
            return Err(parse_error(path, line, "expected two columns"));
        }
        ts.push(parse_f64(path, line, fields[0])?);
        vs.push(parse_f64(path, line, fields[1])?);
    }
    TickSeries::new(ts, vs).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Emit when `|v − ref| / |ref|` exceeds the fraction; the reference
    /// resets to the value at each event.
    Relative(f64),
    /// Emit at every row whose value reaches the level.
    Absolute(f64),
}

pub const DEFAULT_MIN_EVENTS: usize = 50;

/// Turns a tick series into events. Times are measured from the first row;
/// rows sharing a timestamp with the previous event are skipped.
pub fn extract_events_by_threshold(
    series: &TickSeries,
    threshold: Threshold,
    min_events: usize,
) -> Result<EventSequence> {
    if series.len() < 2 {
        return Err(Error::sequence("tick series needs at least 2 rows"));
    }
    let level = match threshold {
        Threshold::Relative(x) | Threshold::Absolute(x) => x,
    };
    if !(level.is_finite() && (level > 0.0 || matches!(threshold, Threshold::Absolute(_)))) {
        return Err(Error::param(format!("threshold must be positive, got {level}")));
    }
    let origin = series.timestamps[0];
    let mut times: Vec<f64> = Vec::new();
    let mut reference = series.values[0];
    let start = match threshold {
        Threshold::Relative(_) => 1,
        Threshold::Absolute(_) => 0,
    };
    for i in start..series.len() {
        let v = series.values[i];
        let hit = match threshold {
            Threshold::Relative(f) => {
                let hit = reference != 0.0 && ((v - reference) / reference).abs() > f;
                if hit {
                    reference = v;
                }
                hit
            }
            Threshold::Absolute(a) => v >= a,
        };
        let t = series.timestamps[i] - origin;
        if hit && times.last().is_none_or(|&last| t > last) {
            times.push(t);
        }
    }
    if times.len() < min_events.max(1) {
        return Err(Error::sequence(format!(
            "threshold produced {} events, fewer than the minimum {min_events}",
            times.len()
        )));
    }
    let horizon = series.timestamps[series.len() - 1] - origin;
    EventSequence::new(times, horizon)
}

/// Configuration file: `key = value` lines mirroring the command line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub resolution: Option<usize>,
    pub percentile: Option<f64>,
    pub tau_max: Option<f64>,
    pub eta: Option<f64>,
    pub holdout: Option<f64>,
    pub split_time: Option<SplitTime>,
    pub gd_restarts: Option<usize>,
    pub quadrature_fallback: Option<bool>,
    pub additive_refit: Option<bool>,
    pub unit: Option<f64>,
    pub seed: Option<u64>,
    pub quantiles: Option<usize>,
}

impl ConfigFile {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(path, &read_text(path)?)
    }

    /// Overlays `other` (command line values) on `self`.
    pub fn overridden_by(&self, other: &ConfigFile) -> ConfigFile {
        ConfigFile {
            resolution: other.resolution.or(self.resolution),
            percentile: other.percentile.or(self.percentile),
            tau_max: other.tau_max.or(self.tau_max),
            eta: other.eta.or(self.eta),
            holdout: other.holdout.or(self.holdout),
            split_time: other.split_time.or(self.split_time),
            gd_restarts: other.gd_restarts.or(self.gd_restarts),
            quadrature_fallback: other.quadrature_fallback.or(self.quadrature_fallback),
            additive_refit: other.additive_refit.or(self.additive_refit),
            unit: other.unit.or(self.unit),
            seed: other.seed.or(self.seed),
            quantiles: other.quantiles.or(self.quantiles),
        }
    }

    pub fn decompose_config(&self) -> DecomposeConfig {
        let d = DecomposeConfig::default();
        DecomposeConfig {
            resolution: self.resolution.unwrap_or(d.resolution),
            percentile: self.percentile.unwrap_or(d.percentile),
            tau_max: self.tau_max.or(d.tau_max),
            eta: self.eta.unwrap_or(d.eta),
            holdout: self.holdout.or(d.holdout),
            split_time: self.split_time.unwrap_or(d.split_time),
            gd_restarts: self.gd_restarts.unwrap_or(d.gd_restarts),
            quadrature_fallback: self.quadrature_fallback.unwrap_or(d.quadrature_fallback),
            additive_refit: self.additive_refit.unwrap_or(d.additive_refit),
        }
    }
}

/// Reads events and divides every timestamp by `unit` when given.
pub fn read_events_in_unit(path: &Path, unit: Option<f64>) -> Result<EventSequence> {
    let events = read_events(path)?;
    match unit {
        None => Ok(events),
        Some(u) if u > 0.0 && u.is_finite() => events.rescaled(1.0 / u),
        Some(u) => Err(Error::param(format!("unit must be positive, got {u}"))),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
