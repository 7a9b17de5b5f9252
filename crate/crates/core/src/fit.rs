//! Parametric fits to a kernel estimate by L1 residue minimization.
//!
//! Every candidate is found by multi-start Nelder–Mead on an unconstrained
//! parameterization: positive parameters live in log space and the power-law
//! exponent is mapped into `(1, 10]`. The start set is derived from simple
//! statistics of the estimate so that fits are fully deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    stationarity_norm, BaseKernel, CompositeKernel, CompositionOp, KernelFamily, StationarityOptions,
    StationarityVerdict,
};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::spectral::KernelEstimate;

const PARAM_MIN: f64 = 1e-8;
const PARAM_MAX: f64 = 1e8;
const EXPONENT_MAX: f64 = 10.0;
const EXPONENT_GAP_MIN: f64 = 1e-6;

/// A fitted candidate with its L1 residue and stationarity verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kernel: CompositeKernel,
    /// `Σ |φ̂(tᵢ) − φ(tᵢ)| δ` over the estimate grid.
    pub residue: f64,
    pub verdict: StationarityVerdict,
}

impl FitResult {
    /// Short structural label such as `EXP`, `EXP+SQR` or `PWL*SNS`.
    pub fn label(&self) -> String {
        kernel_label(&self.kernel)
    }
}

pub fn kernel_label(kernel: &CompositeKernel) -> String {
    let (a, b) = kernel.factors();
    match (kernel.op(), b) {
        (Some(op), Some(b)) => format!("{}{}{}", a.family(), op.symbol(), b.family()),
        _ => a.family().to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub nelder_mead: NelderMeadOptions,
    /// Number of Nelder–Mead runs chained from each start; restarting from
    /// the previous optimum rebuilds a collapsed simplex.
    pub passes: usize,
    pub stationarity: StationarityOptions,
    /// After the frozen additive search, re-fit both addends jointly from
    /// its optimum. Off by default: the base kernel then stays as fitted.
    pub additive_refit: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nelder_mead: NelderMeadOptions::default(),
            passes: 3,
            stationarity: StationarityOptions::default(),
            additive_refit: false,
        }
    }
}

/// `Σ |φ̂(tᵢ) − φ(tᵢ)| δ`; negative estimate samples are used as they are.
pub fn l1_residue(estimate: &KernelEstimate, kernel: &CompositeKernel) -> f64 {
    let d = estimate.delta;
    estimate
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| (v - kernel.evaluate(j as f64 * d)).abs())
        .sum::<f64>()
        * d
}

/// Shape statistics of an estimate used to seed the start set.
#[derive(Debug, Clone, Copy)]
struct Profile {
    peak: f64,
    /// First lag after the peak where the estimate drops below `peak / e`.
    decay: f64,
    /// First lag after the peak where the estimate reaches zero.
    extent: f64,
    mass: f64,
}

impl Profile {
    fn of(values: &[f64], delta: f64) -> Self {
        let n = values.len().max(1);
        let span = n as f64 * delta;
        let (j_peak, peak) =
            values.iter().copied().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (j, v)| if v > acc.1 { (j, v) } else { acc },
            );
        let peak = if peak.is_finite() && peak > 0.0 { peak } else { 1e-3 };
        let after = |pred: &dyn Fn(f64) -> bool| {
            values
                .iter()
                .enumerate()
                .skip(j_peak)
                .find(|(_, v)| pred(**v))
                .map(|(j, _)| j as f64 * delta)
        };
        let decay = after(&|v| v < peak / std::f64::consts::E).unwrap_or(span / 3.0);
        let extent = after(&|v| v <= 0.0).unwrap_or(span);
        let mass = values.iter().map(|v| v.max(0.0)).sum::<f64>() * delta;
        Self {
            peak,
            decay: decay.max(delta),
            extent: extent.max(2.0 * delta),
            mass: mass.max(1e-6),
        }
    }

    /// Eight starting points for a base family.
    fn starts(&self, family: KernelFamily) -> Vec<BaseKernel> {
        let Profile {
            peak,
            decay,
            extent,
            mass,
        } = *self;
        let mut out = Vec::with_capacity(8);
        match family {
            KernelFamily::Exp => {
                for amp in [1.0, 2.0] {
                    for scale in [0.5, 1.0, 2.0, 4.0] {
                        out.push(BaseKernel::Exp {
                            alpha: amp * peak,
                            beta: 1.0 / (scale * decay),
                        });
                    }
                }
            }
            KernelFamily::Pwl => {
                for amp in [1.0, 2.0] {
                    for (cs, p) in [(0.1, 1.2), (0.3, 1.5), (1.0, 2.0), (1.0, 3.0)] {
                        let c = cs * decay;
                        out.push(BaseKernel::Pwl {
                            k: amp * peak * c.powf(p),
                            c,
                            p,
                        });
                    }
                }
            }
            KernelFamily::Sqr => {
                for l in [decay, 2.0 * decay, 0.5 * extent, extent] {
                    out.push(BaseKernel::Sqr { b: peak, l });
                    out.push(BaseKernel::Sqr { b: mass / l, l });
                }
            }
            KernelFamily::Sns => {
                for end in [decay, 2.0 * decay, 0.5 * extent, extent] {
                    let omega = std::f64::consts::PI / end;
                    out.push(BaseKernel::Sns { a: peak, omega });
                    out.push(BaseKernel::Sns {
                        a: 0.5 * mass * omega,
                        omega,
                    });
                }
            }
        }
        out
    }
}

fn clamp_param(v: f64) -> f64 {
    if v.is_nan() {
        PARAM_MIN
    } else {
        v.clamp(PARAM_MIN, PARAM_MAX)
    }
}

fn decode_positive(z: f64) -> f64 {
    clamp_param(z.exp())
}

fn encode_positive(v: f64) -> f64 {
    clamp_param(v).ln()
}

fn decode_exponent(z: f64) -> f64 {
    1.0 + z.exp().clamp(EXPONENT_GAP_MIN, EXPONENT_MAX - 1.0)
}

fn encode_exponent(p: f64) -> f64 {
    (p - 1.0).clamp(EXPONENT_GAP_MIN, EXPONENT_MAX - 1.0).ln()
}

/// Unconstrained coordinates of a base kernel.
fn encode(k: &BaseKernel) -> Vec<f64> {
    match *k {
        BaseKernel::Pwl { k, c, p } => vec![encode_positive(k), encode_positive(c), encode_exponent(p)],
        _ => k.params().into_iter().map(encode_positive).collect(),
    }
}

fn decode(family: KernelFamily, z: &[f64]) -> BaseKernel {
    match family {
        KernelFamily::Pwl => BaseKernel::Pwl {
            k: decode_positive(z[0]),
            c: decode_positive(z[1]),
            p: decode_exponent(z[2]),
        },
        _ => {
            let v: Vec<f64> = z.iter().map(|&x| decode_positive(x)).collect();
            BaseKernel::from_params(family, &v)
        }
    }
}

/// Runs the multi-start search and returns the best kernel by re-evaluated
/// residue. Starts whose optimum is non-finite or invalid count as failures.
fn multistart<B>(
    estimate: &KernelEstimate,
    starts: &[Vec<f64>],
    build: B,
    family: &str,
    opts: &FitOptions,
) -> Result<FitResult>
where
    B: Fn(&[f64]) -> CompositeKernel,
{
    let objective = |z: &[f64]| l1_residue(estimate, &build(z));
    let mut best: Option<(CompositeKernel, f64)> = None;
    let mut best_seen = f64::INFINITY;
    for start in starts {
        let mut z = start.clone();
        for _ in 0..opts.passes.max(1) {
            let steps = vec![0.5; z.len()];
            let m = nelder_mead(objective, &z, &steps, &opts.nelder_mead);
            z = m.x;
            if m.converged && m.iterations < 10 {
                break;
            }
        }
        let kernel = build(&z);
        let residue = l1_residue(estimate, &kernel);
        if residue.is_finite() {
            best_seen = best_seen.min(residue);
        }
        if !residue.is_finite() || kernel.validated().is_err() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, r)| residue < *r) {
            best = Some((kernel, residue));
        }
    }
    let (kernel, residue) = best.ok_or(Error::OptimizerFailure {
        family: family.to_string(),
        best_residue: best_seen,
    })?;
    let verdict = stationarity_norm(&kernel, &opts.stationarity)?;
    Ok(FitResult {
        kernel,
        residue,
        verdict,
    })
}

pub fn fit_single(estimate: &KernelEstimate, family: KernelFamily) -> Result<FitResult> {
    fit_single_with(estimate, family, &FitOptions::default())
}

/// Best single kernel of `family` for the estimate.
pub fn fit_single_with(estimate: &KernelEstimate, family: KernelFamily, opts: &FitOptions) -> Result<FitResult> {
    if estimate.is_empty() {
        return Err(Error::param("empty kernel estimate"));
    }
    let profile = Profile::of(&estimate.values, estimate.delta);
    let starts: Vec<Vec<f64>> = profile.starts(family).iter().map(encode).collect();
    multistart(
        estimate,
        &starts,
        |z| CompositeKernel::Single(decode(family, z)),
        family.as_str(),
        opts,
    )
}

pub fn fit_expansion(
    estimate: &KernelEstimate,
    fixed: &FitResult,
    op: CompositionOp,
    family: KernelFamily,
) -> Result<FitResult> {
    fit_expansion_with(estimate, fixed, op, family, &FitOptions::default())
}

/// Extends a single-kernel fit by one addend or factor of `family`.
///
/// Sums keep `fixed` frozen and fit the addend to the residual; the start set
/// includes a vanishing addend so the result never does worse than `fixed`.
/// Products re-fit both factors jointly. The new factor is normalized to 1 at
/// the origin (amplitude 1 for SNS), removing the redundant amplitude. Where
/// the product norm needs a shared support end (SQR×SNS, SNS×SNS) the new
/// factor's end is tied to the fixed factor's.
pub fn fit_expansion_with(
    estimate: &KernelEstimate,
    fixed: &FitResult,
    op: CompositionOp,
    family: KernelFamily,
    opts: &FitOptions,
) -> Result<FitResult> {
    let base = match fixed.kernel {
        CompositeKernel::Single(k) => k,
        other => {
            return Err(Error::param(format!(
                "expansion needs a single-kernel fit, got {other}"
            )))
        }
    };
    if estimate.is_empty() {
        return Err(Error::param("empty kernel estimate"));
    }
    let label = format!("{}{}{}", base.family(), op.symbol(), family);
    match op {
        CompositionOp::Sum => {
            let d = estimate.delta;
            let residual: Vec<f64> = estimate
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| v - base.evaluate(j as f64 * d))
                .collect();
            let profile = Profile::of(&residual, d);
            let mut starts: Vec<Vec<f64>> = profile.starts(family).iter().map(encode).collect();
            starts.push(encode(&vanishing(family, &profile)));
            let frozen = multistart(
                estimate,
                &starts,
                |z| CompositeKernel::Sum(base, decode(family, z)),
                &label,
                opts,
            )?;
            if !opts.additive_refit {
                return Ok(frozen);
            }
            let (_, addend) = frozen.kernel.factors();
            let mut start = encode(&base);
            start.extend(encode(&addend.expect("sum has two addends")));
            let n = base.family().arity();
            let joint = multistart(
                estimate,
                &[start],
                |z| CompositeKernel::Sum(decode(base.family(), &z[..n]), decode(family, &z[n..])),
                &label,
                opts,
            )?;
            Ok(if joint.residue < frozen.residue { joint } else { frozen })
        }
        CompositionOp::Product => {
            let profile = Profile::of(&estimate.values, estimate.delta);
            let shape = ProductShape::new(base.family(), family);
            let starts = shape.starts(&base, &profile, estimate.tau_max.max(estimate.delta));
            multistart(estimate, &starts, |z| shape.build(z), &label, opts)
        }
    }
}

/// A start for the additive expansion that contributes almost nothing.
fn vanishing(family: KernelFamily, profile: &Profile) -> BaseKernel {
    let t = profile.decay;
    match family {
        KernelFamily::Exp => BaseKernel::Exp {
            alpha: PARAM_MIN,
            beta: 1.0 / t,
        },
        KernelFamily::Pwl => BaseKernel::Pwl {
            k: PARAM_MIN,
            c: t,
            p: 2.0,
        },
        KernelFamily::Sqr => BaseKernel::Sqr { b: PARAM_MIN, l: t },
        KernelFamily::Sns => BaseKernel::Sns {
            a: PARAM_MIN,
            omega: std::f64::consts::PI / t,
        },
    }
}

/// Coordinates of a product fit: all of the first factor, then the free
/// shape parameters of the normalized second factor.
#[derive(Debug, Clone, Copy)]
struct ProductShape {
    first: KernelFamily,
    second: KernelFamily,
    /// Second factor's support end follows the first's.
    tied: bool,
}

impl ProductShape {
    fn new(first: KernelFamily, second: KernelFamily) -> Self {
        let tied = matches!(
            (first, second),
            (KernelFamily::Sns, KernelFamily::Sqr)
                | (KernelFamily::Sqr, KernelFamily::Sns)
                | (KernelFamily::Sns, KernelFamily::Sns)
        );
        Self { first, second, tied }
    }

    fn build(&self, z: &[f64]) -> CompositeKernel {
        let n = self.first.arity();
        let first = decode(self.first, &z[..n]);
        let rest = &z[n..];
        let second = if self.tied {
            let end = first.support_end();
            match self.second {
                KernelFamily::Sqr => BaseKernel::Sqr { b: 1.0, l: end },
                _ => BaseKernel::Sns {
                    a: 1.0,
                    omega: std::f64::consts::PI / end,
                },
            }
        } else {
            match self.second {
                KernelFamily::Exp => BaseKernel::Exp {
                    alpha: 1.0,
                    beta: decode_positive(rest[0]),
                },
                KernelFamily::Pwl => {
                    let c = decode_positive(rest[0]);
                    let p = decode_exponent(rest[1]);
                    BaseKernel::Pwl { k: c.powf(p), c, p }
                }
                KernelFamily::Sqr => BaseKernel::Sqr {
                    b: 1.0,
                    l: decode_positive(rest[0]),
                },
                KernelFamily::Sns => BaseKernel::Sns {
                    a: 1.0,
                    omega: decode_positive(rest[0]),
                },
            }
        };
        CompositeKernel::Product(first, second)
    }

    /// Eight starts: the fixed factor (at two amplitudes) times four
    /// near-neutral variants of the new factor.
    fn starts(&self, base: &BaseKernel, profile: &Profile, span: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(8);
        for amp in [1.0, 2.0] {
            for variant in 0..4 {
                let (first, second) = self.seed(base, profile, span, variant);
                let mut params = base.params();
                params[0] *= amp * first;
                let mut z = encode(&BaseKernel::from_params(self.first, &params));
                z.extend(second);
                out.push(z);
            }
        }
        out
    }

    /// Returns the amplitude correction for the first factor and the encoded
    /// shape parameters of the second.
    fn seed(&self, base: &BaseKernel, profile: &Profile, span: f64, variant: usize) -> (f64, Vec<f64>) {
        let v = variant as f64;
        if self.tied {
            // SNS times SQR/SNS on the same support: amplitude only
            return (1.0 + v, Vec::new());
        }
        let sns_end = [profile.decay, 2.0 * profile.decay, 0.5 * profile.extent, profile.extent];
        match self.second {
            KernelFamily::Exp => (1.0, vec![encode_positive(1e-3 * 10f64.powf(v) / span)]),
            KernelFamily::Pwl => {
                let c = span * [100.0, 10.0, 1.0, 0.3][variant];
                (1.0, vec![encode_positive(c), encode_exponent(1.5)])
            }
            KernelFamily::Sqr => {
                let end = base.support_end().min(2.0 * span);
                let l = [2.0 * span, end, 0.5 * profile.extent.min(end), profile.extent][variant];
                (1.0, vec![encode_positive(l)])
            }
            KernelFamily::Sns => {
                let omega = std::f64::consts::PI / sns_end[variant];
                (1.0, vec![encode_positive(omega)])
            }
        }
    }
}
