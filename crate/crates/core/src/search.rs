//! Greedy two-level kernel search with stationarity gating and a comparison
//! against a gradient-fitted exponential baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{covariance_grid, estimate_lambda, horizon_from_histogram};
use crate::error::{Error, Result};
use crate::events::{train_test_split, EventSequence, SplitTime};
use crate::fit::{fit_expansion_with, fit_single_with, FitOptions, FitResult};
use crate::kernels::{BaseKernel, CompositeKernel, CompositionOp, KernelFamily, StationarityOptions};
use crate::likelihood::{
    kernel_mass, log_likelihood, log_likelihood_after, log_likelihood_with, LogLikelihood, Triggering,
};
use crate::simulate::HawkesModel;
use crate::spectral::{invert_to_kernel_with, InversionOptions, KernelEstimate, TabulatedKernel};

/// Settings for [`decompose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    /// Number of grid points on `[0, τ_max)`; `δ = τ_max / resolution`.
    pub resolution: usize,
    /// Inter-event percentile that sets `τ_max` when not given explicitly.
    pub percentile: f64,
    pub tau_max: Option<f64>,
    /// Level-2 regularization: `K₂` replaces a stationary `K₁` only when
    /// `MR₁ ≥ η·MR₂`.
    pub eta: f64,
    /// Training fraction; when set, estimation uses the first part and all
    /// log-likelihoods are evaluated on the held-out rest.
    pub holdout: Option<f64>,
    pub split_time: SplitTime,
    pub gd_restarts: usize,
    /// Re-check bound-only product norms by quadrature.
    pub quadrature_fallback: bool,
    pub additive_refit: bool,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            resolution: 100,
            percentile: 0.95,
            tau_max: None,
            eta: 1.2,
            holdout: None,
            split_time: SplitTime::Shifted,
            gd_restarts: 5,
            quadrature_fallback: false,
            additive_refit: false,
        }
    }
}

impl DecomposeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::param(format!(
                "resolution must be at least 2, got {}",
                self.resolution
            )));
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return Err(Error::param(format!(
                "percentile must lie in (0, 1), got {}",
                self.percentile
            )));
        }
        if let Some(t) = self.tau_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::param(format!("tau_max must be positive, got {t}")));
            }
        }
        if !(self.eta > 0.0) {
            return Err(Error::param(format!("eta must be positive, got {}", self.eta)));
        }
        if let Some(f) = self.holdout {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::param(format!("holdout must lie in (0, 1), got {f}")));
            }
        }
        if self.gd_restarts == 0 {
            return Err(Error::param("gd_restarts must be at least 1"));
        }
        Ok(())
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            stationarity: StationarityOptions {
                quadrature_fallback: self.quadrature_fallback,
                ..StationarityOptions::default()
            },
            additive_refit: self.additive_refit,
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chosen {
    K1,
    K2,
    #[serde(rename = "GD")]
    Gd,
}

/// Level outcome of the stationarity-gated comparison, before the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    K1,
    K2,
}

/// Picks between the level-1 and level-2 candidates.
///
/// A stationary `K₁` is kept unless `K₂` is stationary and
/// `MR₁ ≥ η·MR₂`; a non-stationary `K₁` falls back to a stationary `K₂`.
pub fn select_level(k1: &FitResult, k2: &FitResult, eta: f64) -> Option<Level> {
    match (k1.verdict.stationary, k2.verdict.stationary) {
        (true, true) if k1.residue >= eta * k2.residue => Some(Level::K2),
        (true, _) => Some(Level::K1),
        (false, true) => Some(Level::K2),
        (false, false) => None,
    }
}

/// A kernel candidate turned into a full model with its log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub fit: FitResult,
    /// `None` when the kernel is not stationary.
    pub model: Option<HawkesModel>,
    pub llh: Option<LogLikelihood>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdBaseline {
    pub model: HawkesModel,
    /// Log-likelihood on the scoring set; `-∞` for non-stationary fits.
    pub llh: LogLikelihood,
    /// Training log-likelihood reached by the ascent.
    #[serde(with = "crate::io::nonfinite")]
    pub train_llh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStage {
    Single,
    Expansion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub stage: FitStage,
    pub label: String,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub chosen: Chosen,
    /// Outcome of the stationarity-gated level comparison, before the
    /// baseline; `None` when neither level is stationary.
    pub level: Option<Level>,
    /// The selected model.
    pub model: HawkesModel,
    pub k1: Candidate,
    pub k2: Candidate,
    pub gd: Option<GdBaseline>,
    /// Log-likelihood of the clamped nonparametric estimate used directly as
    /// the kernel; `None` when its mass is not below one.
    pub llh_estimate: Option<LogLikelihood>,
    pub eta: f64,
    /// Log-likelihood of the better of `K₁`/`K₂` on the scoring set.
    pub llh_k_chosen: Option<LogLikelihood>,
    /// Whether log-likelihoods are on held-out events.
    pub held_out: bool,
    pub lambda_hat: f64,
    pub delta: f64,
    pub tau_max: f64,
    /// 4 single fits in family order, then 8 expansions.
    pub audit: Vec<AuditEntry>,
    pub estimate: KernelEstimate,
}

impl DecompositionResult {
    pub fn candidate(&self, level: Level) -> &Candidate {
        match level {
            Level::K1 => &self.k1,
            Level::K2 => &self.k2,
        }
    }
}

/// Where log-likelihoods are evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Scoring<'a> {
    InSample(&'a EventSequence),
    /// Test sequence whose times start at 0.
    Shifted(&'a EventSequence),
    /// Full sequence scored after `start`, conditioning on earlier events.
    After(&'a EventSequence, f64),
}

impl Scoring<'_> {
    pub fn score(&self, model: &HawkesModel) -> LogLikelihood {
        match *self {
            Scoring::InSample(ev) | Scoring::Shifted(ev) => log_likelihood(model, ev),
            Scoring::After(ev, start) => log_likelihood_after(model, ev, start),
        }
    }

    pub fn score_with<K: Triggering>(&self, mu: f64, kernel: &K) -> LogLikelihood {
        match *self {
            Scoring::InSample(ev) | Scoring::Shifted(ev) => log_likelihood_with(mu, kernel, ev, 0.0),
            Scoring::After(ev, start) => log_likelihood_with(mu, kernel, ev, start),
        }
    }

    fn held_out(&self) -> bool {
        !matches!(self, Scoring::InSample(_))
    }
}

/// The expansions in their fixed order: +EXP, ×EXP, +PWL, ×PWL, ...
pub fn expansion_order() -> Vec<(CompositionOp, KernelFamily)> {
    KernelFamily::ALL
        .iter()
        .flat_map(|&f| [(CompositionOp::Sum, f), (CompositionOp::Product, f)])
        .collect()
}

fn argmin(fits: &[FitResult]) -> usize {
    let mut best = 0;
    for (i, f) in fits.iter().enumerate() {
        if f.residue < fits[best].residue {
            best = i;
        }
    }
    best
}

/// Runs the full pipeline: covariance, inversion, greedy fits, selection and
/// the baseline comparison.
pub fn decompose(events: &EventSequence, config: &DecomposeConfig) -> Result<DecompositionResult> {
    config.validate()?;
    let split = split_for(events, config)?;
    let (train, scoring) = training_and_scoring(events, &split, config);
    let tau_max = match config.tau_max {
        Some(t) => t.min(train.horizon()),
        None => horizon_from_histogram(train, config.percentile).map_err(|e| e.at_stage("covariance"))?,
    };
    let delta = tau_max / config.resolution as f64;
    let grid = covariance_grid(train, delta, tau_max).map_err(|e| e.at_stage("covariance"))?;
    let estimate = invert_to_kernel_with(&grid, &InversionOptions::default()).map_err(|e| e.at_stage("spectral"))?;
    decompose_estimate(train, scoring, estimate, grid.lambda_hat, config)
}

/// Same as [`decompose`] from a previously computed kernel estimate; the
/// events still provide the rate, the baseline fit and the scoring set.
pub fn decompose_with_estimate(
    events: &EventSequence,
    estimate: KernelEstimate,
    config: &DecomposeConfig,
) -> Result<DecompositionResult> {
    config.validate()?;
    let split = split_for(events, config)?;
    let (train, scoring) = training_and_scoring(events, &split, config);
    let lambda_hat = estimate_lambda(train).map_err(|e| e.at_stage("covariance"))?;
    decompose_estimate(train, scoring, estimate, lambda_hat, config)
}

fn split_for(events: &EventSequence, config: &DecomposeConfig) -> Result<Option<(EventSequence, EventSequence)>> {
    config
        .holdout
        .map(|f| train_test_split(events, f, config.split_time).map_err(|e| e.at_stage("split")))
        .transpose()
}

fn training_and_scoring<'a>(
    events: &'a EventSequence,
    split: &'a Option<(EventSequence, EventSequence)>,
    config: &DecomposeConfig,
) -> (&'a EventSequence, Scoring<'a>) {
    match split {
        None => (events, Scoring::InSample(events)),
        Some((train, test)) => match config.split_time {
            SplitTime::Shifted => (train, Scoring::Shifted(test)),
            SplitTime::Absolute => (train, Scoring::After(events, train.horizon())),
        },
    }
}

/// Selection stage on a given kernel estimate. `lambda_hat` is the mean
/// rate used to set each candidate's background rate.
pub fn decompose_estimate(
    train: &EventSequence,
    scoring: Scoring<'_>,
    estimate: KernelEstimate,
    lambda_hat: f64,
    config: &DecomposeConfig,
) -> Result<DecompositionResult> {
    config.validate()?;
    let opts = config.fit_options();
    let singles: Vec<FitResult> = KernelFamily::ALL
        .par_iter()
        .map(|&f| fit_single_with(&estimate, f, &opts))
        .collect::<Result<_>>()
        .map_err(|e| e.at_stage("fit"))?;
    let k1 = singles[argmin(&singles)].clone();
    let order = expansion_order();
    let expansions: Vec<FitResult> = order
        .par_iter()
        .map(|&(op, f)| fit_expansion_with(&estimate, &k1, op, f, &opts))
        .collect::<Result<_>>()
        .map_err(|e| e.at_stage("fit"))?;
    let k2 = expansions[argmin(&expansions)].clone();

    let to_candidate = |fit: FitResult| {
        let model = fit
            .verdict
            .stationary
            .then(|| HawkesModel::new(lambda_hat * (1.0 - kernel_mass(&fit.kernel)), fit.kernel).ok())
            .flatten();
        let llh = model.as_ref().map(|m| scoring.score(m));
        Candidate { fit, model, llh }
    };
    let k1 = to_candidate(k1);
    let k2 = to_candidate(k2);

    let level = select_level(&k1.fit, &k2.fit, config.eta);
    let gd = fit_gd_exponential_with(train, config.gd_restarts)
        .ok()
        .map(|(model, train_llh)| GdBaseline {
            llh: if train_llh.is_finite() {
                scoring.score(&model)
            } else {
                LogLikelihood {
                    value: f64::NEG_INFINITY,
                    n_events: 0,
                    horizon: train.horizon(),
                    diagnostic: Some("baseline fit is not stationary".into()),
                }
            },
            model,
            train_llh,
        });

    let k_choice = level.and_then(|l| {
        let c = match l {
            Level::K1 => &k1,
            Level::K2 => &k2,
        };
        let llh = c.llh.clone()?;
        let model = c.model?;
        Some((l, model, llh))
    });
    let gd_usable = gd.as_ref().filter(|g| g.llh.is_finite());
    let (chosen, model, llh_k_chosen) = match (k_choice, gd_usable) {
        (Some((_, _, llh)), Some(g)) if g.llh.value > llh.value => (Chosen::Gd, g.model, Some(llh)),
        (Some((l, model, llh)), _) => {
            let chosen = match l {
                Level::K1 => Chosen::K1,
                Level::K2 => Chosen::K2,
            };
            (chosen, model, Some(llh))
        }
        (None, Some(g)) => (Chosen::Gd, g.model, None),
        (None, None) => return Err(Error::NoStationaryModel),
    };

    let mut audit: Vec<AuditEntry> = singles
        .into_iter()
        .map(|fit| AuditEntry {
            stage: FitStage::Single,
            label: fit.label(),
            fit,
        })
        .collect();
    audit.extend(expansions.into_iter().map(|fit| AuditEntry {
        stage: FitStage::Expansion,
        label: fit.label(),
        fit,
    }));

    let tabulated = TabulatedKernel::from_estimate(&estimate);
    let tab_mu = lambda_hat * (1.0 - tabulated.mass());
    let llh_estimate = (tab_mu > 0.0).then(|| scoring.score_with(tab_mu, &tabulated));

    Ok(DecompositionResult {
        chosen,
        level,
        llh_estimate,
        model,
        k1,
        k2,
        gd,
        eta: config.eta,
        llh_k_chosen,
        held_out: scoring.held_out(),
        lambda_hat,
        delta: estimate.delta,
        tau_max: estimate.tau_max,
        audit,
        estimate,
    })
}

/// Log-likelihood of an exponential Hawkes model and its gradient with
/// respect to `(μ, α, β)`, using the `O(n)` recursion
/// `Aᵢ = e^{−βΔᵢ}(1 + Aᵢ₋₁)`.
pub fn exp_log_likelihood(mu: f64, alpha: f64, beta: f64, events: &EventSequence) -> (f64, [f64; 3]) {
    let times = events.times();
    let horizon = events.horizon();
    let (mut a, mut b) = (0.0, 0.0); // A and dA/dβ
    let mut value = -mu * horizon;
    let mut grad = [-horizon, 0.0, 0.0];
    let mut prev: Option<f64> = None;
    for &t in times {
        if let Some(p) = prev {
            let dt = t - p;
            let e = (-beta * dt).exp();
            b = e * (b - dt * (1.0 + a));
            a = e * (1.0 + a);
        }
        prev = Some(t);
        let lam = mu + alpha * a;
        if !(lam > 0.0) {
            return (f64::NEG_INFINITY, [0.0; 3]);
        }
        value += lam.ln();
        grad[0] += 1.0 / lam;
        grad[1] += a / lam;
        grad[2] += alpha * b / lam;
        let s = horizon - t;
        let decay = (-beta * s).exp();
        let mass = -(-beta * s).exp_m1();
        value -= alpha / beta * mass;
        grad[1] -= mass / beta;
        grad[2] -= -alpha / (beta * beta) * mass + alpha / beta * s * decay;
    }
    (value, grad)
}

/// Training objective: `-∞` outside the stationary region.
fn gd_objective(theta: &[f64; 3], events: &EventSequence) -> (f64, [f64; 3]) {
    let [mu, alpha, beta] = theta.map(f64::exp);
    if !(alpha < beta) || !mu.is_finite() || !beta.is_finite() {
        return (f64::NEG_INFINITY, [0.0; 3]);
    }
    let (v, g) = exp_log_likelihood(mu, alpha, beta, events);
    (v, [g[0] * mu, g[1] * alpha, g[2] * beta])
}

/// Gradient ascent on log-parameters with Armijo backtracking.
fn ascend(events: &EventSequence, start: [f64; 3]) -> ([f64; 3], f64) {
    let mut theta = start;
    let (mut value, mut grad) = gd_objective(&theta, events);
    if !value.is_finite() {
        return (theta, value);
    }
    let mut step = 1e-3;
    for _ in 0..500 {
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2.sqrt() < 1e-8 * (1.0 + value.abs()) {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let trial = [0, 1, 2].map(|i| theta[i] + step * grad[i]);
            let (v, g) = gd_objective(&trial, events);
            if v.is_finite() && v >= value + 1e-4 * step * g2 {
                let gain = v - value;
                theta = trial;
                value = v;
                grad = g;
                step *= 2.0;
                accepted = true;
                if gain < 1e-12 * (1.0 + value.abs()) {
                    return (theta, value);
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (theta, value)
}

pub fn fit_gd_exponential(events: &EventSequence) -> Result<(HawkesModel, f64)> {
    fit_gd_exponential_with(events, DecomposeConfig::default().gd_restarts)
}

/// Maximum-likelihood exponential Hawkes model by gradient ascent from
/// `restarts` deterministic starts. Returns the model and its training
/// log-likelihood, `-∞` when no start reached a stationary fit.
pub fn fit_gd_exponential_with(events: &EventSequence, restarts: usize) -> Result<(HawkesModel, f64)> {
    if events.len() < 2 {
        return Err(Error::sequence("baseline fit needs at least 2 events"));
    }
    let rate = events.len() as f64 / events.horizon();
    let intervals = events.intervals();
    let mean_gap = intervals.iter().sum::<f64>() / intervals.len().max(1) as f64;
    let beta0 = 1.0 / mean_gap.max(f64::MIN_POSITIVE);
    // (norm, decay multiplier) for each start
    const STARTS: [(f64, f64); 8] = [
        (0.5, 1.0),
        (0.3, 10.0),
        (0.7, 0.1),
        (0.2, 0.3),
        (0.8, 3.0),
        (0.5, 30.0),
        (0.1, 0.03),
        (0.9, 1.0),
    ];
    let mut best: Option<([f64; 3], f64)> = None;
    for k in 0..restarts.max(1) {
        let (norm, mult) = STARTS[k % STARTS.len()];
        let jitter = 1.0 + (k / STARTS.len()) as f64;
        let beta = beta0 * mult * jitter;
        let start = [(rate * (1.0 - norm)).ln(), (norm * beta).ln(), beta.ln()];
        let (theta, value) = ascend(events, start);
        if best.is_none_or(|(_, v)| value > v) {
            best = Some((theta, value));
        }
    }
    let (theta, value) = best.expect("at least one start");
    let [mu, alpha, beta] = theta.map(f64::exp);
    let model = HawkesModel {
        mu,
        kernel: CompositeKernel::Single(BaseKernel::Exp { alpha, beta }),
    };
    Ok((model, value))
}
