//! Base triggering kernels, their one-level compositions and closed-form
//! stationarity norms.
//!
//! Four parametric families are supported:
//!
//! | family | `φ(t)` for `t ≥ 0`            | support         | `‖φ‖`               |
//! |--------|--------------------------------|-----------------|---------------------|
//! | EXP    | `α e^{-βt}`                    | `[0, ∞)`        | `α/β`               |
//! | PWL    | `K / (c + t)^p`, `p > 1`       | `[0, ∞)`        | `K c^{1-p}/(p-1)`   |
//! | SQR    | `B`                            | `[0, L]`        | `B L`               |
//! | SNS    | `A sin(ωt)`                    | `[0, π/ω]`      | `2A/ω`              |
//!
//! A kernel induces a stationary process when its norm lies in `[0, 1)`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric;

/// Kernel family tag. The derived order is the tie-breaking order used when
/// candidate fits have equal residues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    #[serde(rename = "EXP")]
    Exp,
    #[serde(rename = "PWL")]
    Pwl,
    #[serde(rename = "SQR")]
    Sqr,
    #[serde(rename = "SNS")]
    Sns,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::Exp,
        KernelFamily::Pwl,
        KernelFamily::Sqr,
        KernelFamily::Sns,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::Exp => "EXP",
            KernelFamily::Pwl => "PWL",
            KernelFamily::Sqr => "SQR",
            KernelFamily::Sns => "SNS",
        }
    }

    /// Number of free parameters.
    pub fn arity(self) -> usize {
        match self {
            KernelFamily::Pwl => 3,
            _ => 2,
        }
    }

    /// Finite support families (discontinuous at the end of their support).
    pub fn is_truncated(self) -> bool {
        matches!(self, KernelFamily::Sqr | KernelFamily::Sns)
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EXP" => Ok(KernelFamily::Exp),
            "PWL" => Ok(KernelFamily::Pwl),
            "SQR" => Ok(KernelFamily::Sqr),
            "SNS" => Ok(KernelFamily::Sns),
            other => Err(Error::param(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// One of the four parametric base kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum BaseKernel {
    /// `alpha · exp(-beta t)`
    #[serde(rename = "EXP")]
    Exp { alpha: f64, beta: f64 },
    /// `k / (c + t)^p`
    #[serde(rename = "PWL")]
    Pwl { k: f64, c: f64, p: f64 },
    /// `b` on `[0, l]`
    #[serde(rename = "SQR")]
    Sqr { b: f64, l: f64 },
    /// `a · sin(omega t)` on `[0, π/omega]`
    #[serde(rename = "SNS")]
    Sns { a: f64, omega: f64 },
}

impl BaseKernel {
    pub fn exp(alpha: f64, beta: f64) -> Result<Self> {
        BaseKernel::Exp { alpha, beta }.validated()
    }

    pub fn pwl(k: f64, c: f64, p: f64) -> Result<Self> {
        BaseKernel::Pwl { k, c, p }.validated()
    }

    pub fn sqr(b: f64, l: f64) -> Result<Self> {
        BaseKernel::Sqr { b, l }.validated()
    }

    pub fn sns(a: f64, omega: f64) -> Result<Self> {
        BaseKernel::Sns { a, omega }.validated()
    }

    /// Checks the parameter invariants: all strictly positive and finite,
    /// and `p > 1` for the power law.
    pub fn validated(self) -> Result<Self> {
        let params = self.params();
        if params.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::param(format!(
                "{} parameters must be positive and finite: {params:?}",
                self.family()
            )));
        }
        if let BaseKernel::Pwl { p, .. } = self {
            if p <= 1.0 {
                return Err(Error::param(format!("PWL exponent must exceed 1, got {p}")));
            }
        }
        Ok(self)
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            BaseKernel::Exp { .. } => KernelFamily::Exp,
            BaseKernel::Pwl { .. } => KernelFamily::Pwl,
            BaseKernel::Sqr { .. } => KernelFamily::Sqr,
            BaseKernel::Sns { .. } => KernelFamily::Sns,
        }
    }

    /// Parameters in declaration order.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            BaseKernel::Exp { alpha, beta } => vec![alpha, beta],
            BaseKernel::Pwl { k, c, p } => vec![k, c, p],
            BaseKernel::Sqr { b, l } => vec![b, l],
            BaseKernel::Sns { a, omega } => vec![a, omega],
        }
    }

    /// Inverse of [`BaseKernel::params`]; does not validate.
    pub fn from_params(family: KernelFamily, v: &[f64]) -> Self {
        match family {
            KernelFamily::Exp => BaseKernel::Exp {
                alpha: v[0],
                beta: v[1],
            },
            KernelFamily::Pwl => BaseKernel::Pwl {
                k: v[0],
                c: v[1],
                p: v[2],
            },
            KernelFamily::Sqr => BaseKernel::Sqr { b: v[0], l: v[1] },
            KernelFamily::Sns => BaseKernel::Sns { a: v[0], omega: v[1] },
        }
    }

    /// Right end of the support (`∞` for EXP and PWL).
    pub fn support_end(&self) -> f64 {
        match *self {
            BaseKernel::Sqr { l, .. } => l,
            BaseKernel::Sns { omega, .. } => PI / omega,
            _ => f64::INFINITY,
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            BaseKernel::Exp { alpha, beta } => alpha * (-beta * t).exp(),
            BaseKernel::Pwl { k, c, p } => k * (c + t).powf(-p),
            BaseKernel::Sqr { b, l } => {
                if t <= l {
                    b
                } else {
                    0.0
                }
            }
            BaseKernel::Sns { a, omega } => {
                if t <= PI / omega {
                    (a * (omega * t).sin()).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup_{s ≥ t} φ(s)`: a nonincreasing function dominating the kernel
    /// from `t` on.
    pub fn envelope(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match *self {
            BaseKernel::Exp { .. } | BaseKernel::Pwl { .. } | BaseKernel::Sqr { .. } => self.evaluate(t),
            BaseKernel::Sns { a, omega } => {
                if t <= 0.5 * PI / omega {
                    a
                } else {
                    self.evaluate(t)
                }
            }
        }
    }

    /// Closed-form `∫₀^∞ φ`.
    pub fn norm(&self) -> f64 {
        match *self {
            BaseKernel::Exp { alpha, beta } => alpha / beta,
            BaseKernel::Pwl { k, c, p } => k * c.powf(1.0 - p) / (p - 1.0),
            BaseKernel::Sqr { b, l } => b * l,
            BaseKernel::Sns { a, omega } => 2.0 * a / omega,
        }
    }
}

impl fmt::Display for BaseKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BaseKernel::Exp { alpha, beta } => write!(f, "EXP({alpha:.4}, {beta:.4})"),
            BaseKernel::Pwl { k, c, p } => write!(f, "PWL({k:.4}, {c:.4}, {p:.4})"),
            BaseKernel::Sqr { b, l } => write!(f, "SQR({b:.4}, {l:.4})"),
            BaseKernel::Sns { a, omega } => write!(f, "SNS({a:.4}, {omega:.4})"),
        }
    }
}

/// Binary composition operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositionOp {
    Sum,
    Product,
}

impl CompositionOp {
    pub fn symbol(self) -> char {
        match self {
            CompositionOp::Sum => '+',
            CompositionOp::Product => '*',
        }
    }
}

/// A base kernel or a sum/product of two base kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompositeKernel {
    Single(BaseKernel),
    Sum(BaseKernel, BaseKernel),
    Product(BaseKernel, BaseKernel),
}

impl From<BaseKernel> for CompositeKernel {
    fn from(k: BaseKernel) -> Self {
        CompositeKernel::Single(k)
    }
}

impl CompositeKernel {
    pub fn compose(op: CompositionOp, left: BaseKernel, right: BaseKernel) -> Self {
        match op {
            CompositionOp::Sum => CompositeKernel::Sum(left, right),
            CompositionOp::Product => CompositeKernel::Product(left, right),
        }
    }

    pub fn factors(&self) -> (BaseKernel, Option<BaseKernel>) {
        match *self {
            CompositeKernel::Single(k) => (k, None),
            CompositeKernel::Sum(a, b) | CompositeKernel::Product(a, b) => (a, Some(b)),
        }
    }

    pub fn op(&self) -> Option<CompositionOp> {
        match self {
            CompositeKernel::Single(_) => None,
            CompositeKernel::Sum(..) => Some(CompositionOp::Sum),
            CompositeKernel::Product(..) => Some(CompositionOp::Product),
        }
    }

    pub fn validated(self) -> Result<Self> {
        let (a, b) = self.factors();
        a.validated()?;
        if let Some(b) = b {
            b.validated()?;
        }
        Ok(self)
    }

    /// `φ(t)`; zero for `t < 0` and outside the support.
    pub fn evaluate(&self, t: f64) -> f64 {
        match self {
            CompositeKernel::Single(k) => k.evaluate(t),
            CompositeKernel::Sum(a, b) => a.evaluate(t) + b.evaluate(t),
            CompositeKernel::Product(a, b) => a.evaluate(t) * b.evaluate(t),
        }
    }

    /// Nonincreasing upper envelope `sup_{s ≥ t} φ(s)` (an upper bound for
    /// compositions).
    pub fn envelope(&self, t: f64) -> f64 {
        match self {
            CompositeKernel::Single(k) => k.envelope(t),
            CompositeKernel::Sum(a, b) => a.envelope(t) + b.envelope(t),
            CompositeKernel::Product(a, b) => a.envelope(t) * b.envelope(t),
        }
    }

    pub fn support_end(&self) -> f64 {
        match self {
            CompositeKernel::Single(k) => k.support_end(),
            CompositeKernel::Sum(a, b) => a.support_end().max(b.support_end()),
            CompositeKernel::Product(a, b) => a.support_end().min(b.support_end()),
        }
    }

    /// Lag beyond which the envelope stays below `tol`.
    pub fn effective_horizon(&self, tol: f64) -> f64 {
        let end = self.support_end();
        if self.envelope(0.0) < tol {
            return 0.0;
        }
        let mut hi = end;
        if end.is_finite() {
            if self.envelope(end) >= tol {
                return end;
            }
        } else {
            hi = 1.0;
            while self.envelope(hi) >= tol {
                hi *= 2.0;
                if hi > 1e300 {
                    return f64::INFINITY;
                }
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.envelope(mid) >= tol {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        hi
    }

    pub fn stationarity(&self) -> Result<StationarityVerdict> {
        stationarity_norm(self, &StationarityOptions::default())
    }
}

impl fmt::Display for CompositeKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompositeKernel::Single(k) => write!(f, "{k}"),
            CompositeKernel::Sum(a, b) => write!(f, "{a} + {b}"),
            CompositeKernel::Product(a, b) => write!(f, "{a} * {b}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KernelRepr {
    Composed {
        op: CompositionOp,
        left: BaseKernel,
        right: BaseKernel,
    },
    Base(BaseKernel),
}

impl Serialize for CompositeKernel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match *self {
            CompositeKernel::Single(k) => KernelRepr::Base(k),
            CompositeKernel::Sum(left, right) => KernelRepr::Composed {
                op: CompositionOp::Sum,
                left,
                right,
            },
            CompositeKernel::Product(left, right) => KernelRepr::Composed {
                op: CompositionOp::Product,
                left,
                right,
            },
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CompositeKernel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let kernel = match KernelRepr::deserialize(deserializer)? {
            KernelRepr::Base(k) => CompositeKernel::Single(k),
            KernelRepr::Composed { op, left, right } => CompositeKernel::compose(op, left, right),
        };
        kernel.validated().map_err(serde::de::Error::custom)
    }
}

/// Result of a stationarity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityVerdict {
    /// `‖φ‖`, or an upper bound on it when `is_bound` is set.
    pub norm_value: f64,
    pub is_bound: bool,
    pub stationary: bool,
}

impl StationarityVerdict {
    fn new(norm_value: f64, is_bound: bool) -> Self {
        Self {
            norm_value,
            is_bound,
            stationary: (0.0..1.0).contains(&norm_value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityOptions {
    /// Largest relative gap between support endpoints accepted for
    /// SQR×SNS and SNS×SNS products, whose closed forms assume a shared end.
    pub support_tolerance: f64,
    /// Re-check bound rows (PWL×PWL, PWL×SNS) by quadrature when the bound
    /// is not below one.
    pub quadrature_fallback: bool,
}

impl Default for StationarityOptions {
    fn default() -> Self {
        Self {
            support_tolerance: 0.05,
            quadrature_fallback: false,
        }
    }
}

/// Norm of a kernel from the closed forms, with its stationarity verdict.
///
/// Sums add the single-kernel norms. Products use the pairwise table; the
/// PWL×PWL and PWL×SNS entries are upper bounds.
pub fn stationarity_norm(kernel: &CompositeKernel, opts: &StationarityOptions) -> Result<StationarityVerdict> {
    match kernel {
        CompositeKernel::Single(k) => Ok(StationarityVerdict::new(k.norm(), false)),
        CompositeKernel::Sum(a, b) => Ok(StationarityVerdict::new(a.norm() + b.norm(), false)),
        CompositeKernel::Product(a, b) => {
            let (value, is_bound) = product_norm(a, b, opts.support_tolerance)?;
            if is_bound && value >= 1.0 && opts.quadrature_fallback {
                let exact = product_integral_numeric(a, b);
                if exact < 1.0 {
                    return Ok(StationarityVerdict::new(exact, false));
                }
            }
            Ok(StationarityVerdict::new(value, is_bound))
        }
    }
}

fn relative_gap(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.max(y)
}

fn check_shared_end(x: f64, y: f64, tolerance: f64) -> Result<()> {
    if relative_gap(x, y) > tolerance {
        return Err(Error::SupportMismatch {
            left: x,
            right: y,
            tolerance,
        });
    }
    Ok(())
}

/// `∫ φ₁ φ₂` from the pairwise closed forms; the flag marks upper bounds.
pub fn product_norm(a: &BaseKernel, b: &BaseKernel, support_tolerance: f64) -> Result<(f64, bool)> {
    use BaseKernel::*;
    // order the pair so each unordered combination has one arm
    let (x, y) = if a.family() <= b.family() { (a, b) } else { (b, a) };
    let out = match (*x, *y) {
        (Exp { alpha: a1, beta: b1 }, Exp { alpha: a2, beta: b2 }) => (a1 * a2 / (b1 + b2), false),
        (Exp { alpha, beta }, Pwl { k, c, p }) => {
            let g = numeric::upper_gamma_scaled(1.0 - p, beta * c);
            (alpha * k * c.powf(1.0 - p) * g, false)
        }
        (Exp { alpha, beta }, Sqr { b, l }) => (-alpha * b * (-beta * l).exp_m1() / beta, false),
        (Exp { alpha, beta }, Sns { a, omega }) => (
            a * alpha * omega * (1.0 + (-beta * PI / omega).exp()) / (omega * omega + beta * beta),
            false,
        ),
        (Pwl { k: k1, c: c1, p: p1 }, Pwl { k: k2, c: c2, p: p2 }) => {
            let q = p1 + p2 - 1.0;
            (k1 * k2 / (q * c1.min(c2).powf(q)), true)
        }
        (Pwl { k, c, p }, Sqr { b, l }) => (k * b * (c.powf(1.0 - p) - (c + l).powf(1.0 - p)) / (p - 1.0), false),
        (Pwl { k, c, p }, Sns { a, omega }) => {
            let q = 1.0 - p;
            (k * a * ((c + PI / omega).powf(q) - c.powf(q)) / q, true)
        }
        (Sqr { b: b1, l: l1 }, Sqr { b: b2, l: l2 }) => (b1 * b2 * l1.min(l2), false),
        (Sqr { b, l }, Sns { a, omega }) => {
            check_shared_end(l, PI / omega, support_tolerance)?;
            (2.0 * a * b / omega, false)
        }
        (Sns { a: a1, omega: w1 }, Sns { a: a2, omega: w2 }) => {
            check_shared_end(PI / w1, PI / w2, support_tolerance)?;
            let omega = 0.5 * (w1 + w2);
            (PI * a1 * a2 / (2.0 * omega), false)
        }
        _ => unreachable!("pair is ordered by family"),
    };
    Ok(out)
}

/// `∫₀^∞ φ₁ φ₂` by adaptive quadrature.
pub fn product_integral_numeric(a: &BaseKernel, b: &BaseKernel) -> f64 {
    let f = |t: f64| a.evaluate(t) * b.evaluate(t);
    let end = a.support_end().min(b.support_end());
    if end.is_finite() {
        numeric::integrate(f, 0.0, end, 1e-14, 1e-11)
    } else {
        numeric::integrate_to_infinity(f, 0.0, 1e-14, 1e-11)
    }
}

/// Outcome of multiplying several kernels of one family together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IntraclassProduct {
    /// The product is itself a member of the family.
    Exact { kernel: BaseKernel },
    /// PWL products: the kernel bounds the product from below.
    LowerBound { kernel: BaseKernel },
    /// SNS products keep `A = ∏Aᵢ` but become spikier; no single SNS
    /// represents them.
    NotReducible { amplitude: f64, factors: Vec<BaseKernel> },
}

/// Reduces a product of same-family kernels.
///
/// EXP and SQR reduce exactly (`α = ∏αᵢ, β = Σβᵢ`; `B = ∏Bᵢ, L = min Lᵢ`).
/// PWL yields the lower bound `K = ∏Kᵢ, c = max cᵢ, p = Σpᵢ`.
pub fn reduce_intraclass_product(factors: &[BaseKernel]) -> Result<IntraclassProduct> {
    let first = factors.first().ok_or_else(|| Error::param("empty product"))?;
    let family = first.family();
    if factors.iter().any(|k| k.family() != family) {
        return Err(Error::param("intraclass product requires a single family"));
    }
    for k in factors {
        k.validated()?;
    }
    if factors.len() == 1 {
        return Ok(IntraclassProduct::Exact { kernel: *first });
    }
    let prod = |i: usize| factors.iter().map(|k| k.params()[i]).product::<f64>();
    let sum = |i: usize| factors.iter().map(|k| k.params()[i]).sum::<f64>();
    let min = |i: usize| factors.iter().map(|k| k.params()[i]).fold(f64::INFINITY, f64::min);
    let max = |i: usize| factors.iter().map(|k| k.params()[i]).fold(0.0, f64::max);
    Ok(match family {
        KernelFamily::Exp => IntraclassProduct::Exact {
            kernel: BaseKernel::Exp {
                alpha: prod(0),
                beta: sum(1),
            },
        },
        KernelFamily::Sqr => IntraclassProduct::Exact {
            kernel: BaseKernel::Sqr { b: prod(0), l: min(1) },
        },
        KernelFamily::Pwl => IntraclassProduct::LowerBound {
            kernel: BaseKernel::Pwl {
                k: prod(0),
                c: max(1),
                p: sum(2),
            },
        },
        KernelFamily::Sns => IntraclassProduct::NotReducible {
            amplitude: prod(0),
            factors: factors.to_vec(),
        },
    })
}

/// Dominating function for an arbitrary product
/// `[EXP]^k₁ × [PWL]^k₂ × [SQR]^k₃ × [SNS]^k₄`:
///
/// `amplitude · e^{-decay·x} / (x + c)^p` on `[0, support_end]`, zero beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductBound {
    /// Exponents `(k₁, k₂, k₃, k₄)` in family order.
    pub exponents: [usize; 4],
    /// `∏α · ∏K · ∏B · ∏A` (each empty product is 1).
    pub amplitude: f64,
    /// `Σβ` (0 without EXP factors).
    pub decay: f64,
    /// `(c, p)` of the power-law part: `c = min cᵢ`, `p = Σ pᵢ`.
    pub power_law: Option<(f64, f64)>,
    /// `min(L, π/ω)` over truncated factors, `∞` when there are none.
    pub support_end: f64,
}

impl ProductBound {
    pub fn evaluate(&self, x: f64) -> f64 {
        if x < 0.0 || x > self.support_end {
            return 0.0;
        }
        let mut v = self.amplitude * (-self.decay * x).exp();
        if let Some((c, p)) = self.power_law {
            v *= (x + c).powf(-p);
        }
        v
    }
}

/// Upper bound on a product of base kernels of mixed families.
pub fn interclass_product_upper_bound(factors: &[BaseKernel]) -> Result<ProductBound> {
    if factors.is_empty() {
        return Err(Error::param("empty product: all exponents are zero"));
    }
    let mut exponents = [0usize; 4];
    let mut amplitude = 1.0;
    let mut decay = 0.0;
    let mut c_min = f64::INFINITY;
    let mut p_sum = 0.0;
    let mut support_end = f64::INFINITY;
    for k in factors {
        k.validated()?;
        exponents[k.family() as usize] += 1;
        match *k {
            BaseKernel::Exp { alpha, beta } => {
                amplitude *= alpha;
                decay += beta;
            }
            BaseKernel::Pwl { k, c, p } => {
                amplitude *= k;
                c_min = c_min.min(c);
                p_sum += p;
            }
            BaseKernel::Sqr { b, l } => {
                amplitude *= b;
                support_end = support_end.min(l);
            }
            BaseKernel::Sns { a, omega } => {
                amplitude *= a;
                support_end = support_end.min(PI / omega);
            }
        }
    }
    Ok(ProductBound {
        exponents,
        amplitude,
        decay,
        power_law: (exponents[1] > 0).then_some((c_min, p_sum)),
        support_end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn evaluate_examples() {
        let e = CompositeKernel::Single(BaseKernel::exp(1.0, 1.0).unwrap());
        assert_eq!(e.evaluate(0.0), 1.0);
        assert_eq!(e.evaluate(-1.0), 0.0);
        let s = BaseKernel::sns(1.0, 1.0).unwrap();
        assert_eq!(s.evaluate(PI + 0.1), 0.0);
        let prod = CompositeKernel::Product(BaseKernel::sqr(2.0, 1.0).unwrap(), BaseKernel::exp(1.0, 1.0).unwrap());
        assert!(close(prod.evaluate(0.5), 2.0 * (-0.5f64).exp(), 1e-15));
        assert!(close(prod.evaluate(0.5), 1.213_061_319_425_267, 1e-12));
        assert_eq!(prod.evaluate(1.5), 0.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(BaseKernel::pwl(1.0, 1.0, 1.0).is_err());
        assert!(BaseKernel::exp(0.0, 1.0).is_err());
        assert!(BaseKernel::sqr(1.0, f64::NAN).is_err());
        assert!(BaseKernel::sns(-1.0, 1.0).is_err());
    }

    #[test]
    fn single_and_product_norms() {
        let v = CompositeKernel::from(BaseKernel::exp(0.5, 1.0).unwrap())
            .stationarity()
            .unwrap();
        assert_eq!(v.norm_value, 0.5);
        assert!(v.stationary && !v.is_bound);

        let v = CompositeKernel::from(BaseKernel::sqr(1.0, 1.0).unwrap())
            .stationarity()
            .unwrap();
        assert_eq!(v.norm_value, 1.0);
        assert!(!v.stationary);

        let e = BaseKernel::exp(1.0, 1.0).unwrap();
        let v = CompositeKernel::Product(e, e).stationarity().unwrap();
        assert!(close(v.norm_value, 0.5, 1e-15));

        let v = CompositeKernel::Product(e, BaseKernel::sqr(1.0, 1.0).unwrap())
            .stationarity()
            .unwrap();
        assert!(close(v.norm_value, 1.0 - (-1.0f64).exp(), 1e-15));
        assert!(close(v.norm_value, 0.632_120_558_828_557_7, 1e-12));
    }

    #[test]
    fn bound_rows_flagged() {
        let p = BaseKernel::pwl(0.5, 1.0, 2.0).unwrap();
        let s = BaseKernel::sns(0.5, 2.0).unwrap();
        assert!(CompositeKernel::Product(p, p).stationarity().unwrap().is_bound);
        assert!(CompositeKernel::Product(s, p).stationarity().unwrap().is_bound);
        assert!(!CompositeKernel::Product(s, s).stationarity().unwrap().is_bound);
    }

    #[test]
    fn sum_norm_adds() {
        let a = BaseKernel::exp(0.2, 1.0).unwrap();
        let b = BaseKernel::sqr(0.1, 2.0).unwrap();
        let v = CompositeKernel::Sum(a, b).stationarity().unwrap();
        assert!(close(v.norm_value, 0.4, 1e-15));
    }

    #[test]
    fn support_mismatch_rejected_beyond_tolerance() {
        let q = BaseKernel::sqr(1.0, 1.0).unwrap();
        let s_ok = BaseKernel::sns(0.1, PI / 1.03).unwrap();
        let s_bad = BaseKernel::sns(0.1, PI / 1.5).unwrap();
        assert!(CompositeKernel::Product(q, s_ok).stationarity().is_ok());
        let err = CompositeKernel::Product(q, s_bad).stationarity().unwrap_err();
        assert!(matches!(err, Error::SupportMismatch { .. }));
        let opts = StationarityOptions {
            support_tolerance: 0.5,
            ..Default::default()
        };
        assert!(stationarity_norm(&CompositeKernel::Product(q, s_bad), &opts).is_ok());
        let w = BaseKernel::sns(0.1, 2.0).unwrap();
        assert!(CompositeKernel::Product(w, BaseKernel::sns(0.1, 3.0).unwrap())
            .stationarity()
            .is_err());
    }

    #[test]
    fn quadrature_fallback_accepts_loose_bound() {
        // PWL×PWL bound uses min(c) with both exponents: loose when c differs
        let a = BaseKernel::pwl(2.0, 0.5, 1.5).unwrap();
        let b = BaseKernel::pwl(1.0, 3.0, 1.5).unwrap();
        let k = CompositeKernel::Product(a, b);
        let strict = k.stationarity().unwrap();
        assert!(strict.is_bound && strict.norm_value >= 1.0, "{strict:?}");
        let opts = StationarityOptions {
            quadrature_fallback: true,
            ..Default::default()
        };
        let relaxed = stationarity_norm(&k, &opts).unwrap();
        assert!(relaxed.stationary && !relaxed.is_bound, "{relaxed:?}");
    }

    #[test]
    fn intraclass_reductions() {
        let r = reduce_intraclass_product(&[BaseKernel::exp(2.0, 1.0).unwrap(), BaseKernel::exp(3.0, 2.0).unwrap()])
            .unwrap();
        assert_eq!(
            r,
            IntraclassProduct::Exact {
                kernel: BaseKernel::Exp { alpha: 6.0, beta: 3.0 }
            }
        );

        let r = reduce_intraclass_product(&[BaseKernel::sqr(1.0, 5.0).unwrap(), BaseKernel::sqr(2.0, 3.0).unwrap()])
            .unwrap();
        assert_eq!(
            r,
            IntraclassProduct::Exact {
                kernel: BaseKernel::Sqr { b: 2.0, l: 3.0 }
            }
        );

        let e = BaseKernel::exp(1.0, 1.0).unwrap();
        assert_eq!(
            reduce_intraclass_product(&[e]).unwrap(),
            IntraclassProduct::Exact { kernel: e }
        );

        let r = reduce_intraclass_product(&[
            BaseKernel::pwl(2.0, 1.0, 1.5).unwrap(),
            BaseKernel::pwl(3.0, 2.0, 2.5).unwrap(),
        ])
        .unwrap();
        assert_eq!(
            r,
            IntraclassProduct::LowerBound {
                kernel: BaseKernel::Pwl { k: 6.0, c: 2.0, p: 4.0 }
            }
        );

        let r = reduce_intraclass_product(&[BaseKernel::sns(2.0, 1.0).unwrap(), BaseKernel::sns(0.5, 1.0).unwrap()])
            .unwrap();
        assert!(matches!(r, IntraclassProduct::NotReducible { amplitude, .. } if amplitude == 1.0));

        assert!(reduce_intraclass_product(&[e, BaseKernel::sqr(1.0, 1.0).unwrap()]).is_err());
        assert!(reduce_intraclass_product(&[]).is_err());
    }

    #[test]
    fn interclass_bound_examples() {
        let b =
            interclass_product_upper_bound(&[BaseKernel::exp(1.0, 1.0).unwrap(), BaseKernel::sqr(1.0, 2.0).unwrap()])
                .unwrap();
        assert_eq!(b.exponents, [1, 0, 1, 0]);
        assert_eq!(b.support_end, 2.0);
        for x in [0.0, 0.5, 1.9] {
            assert!(close(b.evaluate(x), (-x).exp(), 1e-15));
        }
        assert_eq!(b.evaluate(2.5), 0.0);

        let b = interclass_product_upper_bound(&[
            BaseKernel::exp(2.0, 0.5).unwrap(),
            BaseKernel::pwl(3.0, 1.5, 2.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(b.exponents, [1, 1, 0, 0]);
        assert!(b.support_end.is_infinite());
        let x = 0.7;
        assert!(close(
            b.evaluate(x),
            6.0 * (-0.5 * x).exp() * (x + 1.5f64).powf(-2.0),
            1e-15
        ));

        assert!(interclass_product_upper_bound(&[]).is_err());
    }

    #[test]
    fn json_shape() {
        let k = CompositeKernel::Sum(
            BaseKernel::exp(0.5, 1.0).unwrap(),
            BaseKernel::pwl(1.0, 2.0, 3.0).unwrap(),
        );
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(
            s,
            r#"{"op":"sum","left":{"type":"EXP","alpha":0.5,"beta":1.0},"right":{"type":"PWL","k":1.0,"c":2.0,"p":3.0}}"#
        );
        let back: CompositeKernel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, k);
        let single: CompositeKernel = serde_json::from_str(r#"{"type":"SNS","a":0.2,"omega":3.0}"#).unwrap();
        assert_eq!(single, CompositeKernel::Single(BaseKernel::Sns { a: 0.2, omega: 3.0 }));
        assert!(serde_json::from_str::<CompositeKernel>(r#"{"type":"PWL","k":1,"c":1,"p":0.5}"#).is_err());
        assert!(serde_json::from_str::<CompositeKernel>(r#"{"type":"EXP","alpha":1}"#).is_err());
    }

    #[test]
    fn effective_horizon_brackets_tolerance() {
        let k = CompositeKernel::from(BaseKernel::exp(1.0, 2.0).unwrap());
        let h = k.effective_horizon(1e-12);
        assert!(close(h, (1e12f64).ln() / 2.0, 1e-9));
        let s = CompositeKernel::from(BaseKernel::sqr(1.0, 3.0).unwrap());
        assert_eq!(s.effective_horizon(1e-12), 3.0);
    }
}
