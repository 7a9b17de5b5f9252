//! Report artifacts for a decomposition: result JSON, kernel curves, Q-Q
//! data and an SVG summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventSequence;
use crate::io::{to_json, write_text};
use crate::likelihood::compensator_increments;
use crate::search::DecompositionResult;
use crate::spectral::TabulatedKernel;

pub const DEFAULT_QUANTILES: usize = 100;

/// Estimated and fitted kernels sampled on the estimate grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub t: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub chosen: Vec<f64>,
}

/// One Q-Q row: unit-exponential quantile against the empirical quantiles
/// of the time-rescaled inter-event increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqRow {
    pub probability: f64,
    pub exponential: f64,
    /// Increments under the chosen model.
    pub model: f64,
    /// Increments under the clamped nonparametric estimate; absent when the
    /// estimate's mass is not below one.
    pub estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub result: DecompositionResult,
    pub curves: Curves,
    pub qq: Vec<QqRow>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let j = pos.floor() as usize;
    let frac = pos - j as f64;
    if j + 1 < sorted.len() {
        sorted[j] * (1.0 - frac) + sorted[j + 1] * frac
    } else {
        sorted[j]
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

pub fn build_bundle(result: &DecompositionResult, events: &EventSequence, quantiles: usize) -> Result<ReportBundle> {
    if quantiles == 0 {
        return Err(Error::param("quantile count must be positive"));
    }
    if events.is_empty() {
        return Err(Error::sequence("report needs at least one event"));
    }
    let est = &result.estimate;
    let t = est.times();
    let sample = |m: Option<&crate::simulate::HawkesModel>| -> Vec<f64> {
        t.iter()
            .map(|&x| m.map_or(f64::NAN, |m| m.kernel.evaluate(x)))
            .collect()
    };
    let curves = Curves {
        phi_hat: est.values.clone(),
        k1: t.iter().map(|&x| result.k1.fit.kernel.evaluate(x)).collect(),
        k2: t.iter().map(|&x| result.k2.fit.kernel.evaluate(x)).collect(),
        chosen: sample(Some(&result.model)),
        t,
    };

    let model_inc = sorted(compensator_increments(
        result.model.mu,
        &result.model.kernel,
        events.times(),
    ));
    let tab = TabulatedKernel::from_estimate(est);
    let tab_mu = result.lambda_hat * (1.0 - tab.mass());
    let tab_inc = (tab_mu > 0.0).then(|| sorted(compensator_increments(tab_mu, &tab, events.times())));
    let qq = (0..quantiles)
        .map(|i| {
            let p = (i as f64 + 0.5) / quantiles as f64;
            QqRow {
                probability: p,
                exponential: -(-p).ln_1p(),
                model: quantile(&model_inc, p),
                estimate: tab_inc.as_ref().map(|v| quantile(v, p)),
            }
        })
        .collect();
    Ok(ReportBundle {
        result: result.clone(),
        curves,
        qq,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn format_curves(c: &Curves) -> String {
    let mut out = String::from("t,phi_hat,k1,k2,chosen\n");
    for i in 0..c.t.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.t[i], c.phi_hat[i], c.k1[i], c.k2[i], c.chosen[i]
        );
    }
    out
}

pub fn format_qq(qq: &[QqRow]) -> String {
    let mut out = String::from("probability,exponential,model,estimate\n");
    for r in qq {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.probability,
            r.exponential,
            r.model,
            fmt_opt(r.estimate)
        );
    }
    out
}

/// Writes `result.json`, `phi_curves.csv`, `qq.csv` and `report.svg` into
/// `out_dir`, creating it if needed. Returns the written paths.
pub fn emit_report(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = [
        ("result.json", to_json(&bundle.result)),
        ("phi_curves.csv", format_curves(&bundle.curves)),
        ("qq.csv", format_qq(&bundle.qq)),
        ("report.svg", render_svg(bundle)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = out_dir.join(name);
        write_text(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 260.0;
const PAD: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Maps data ranges onto one panel's plotting area.
struct Frame {
    x0: f64,
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn new(panel: usize, (x_lo, x_hi): (f64, f64), (y_lo, y_hi): (f64, f64)) -> Self {
        let widen = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let (x_lo, x_hi) = widen(x_lo, x_hi);
        let (y_lo, y_hi) = widen(y_lo, y_hi);
        Self {
            x0: panel as f64 * PANEL_W,
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        }
    }

    fn x(&self, v: f64) -> f64 {
        self.x0 + PAD + (v - self.x_lo) / (self.x_hi - self.x_lo) * (PANEL_W - 1.5 * PAD)
    }

    fn y(&self, v: f64) -> f64 {
        PANEL_H - PAD - (v - self.y_lo) / (self.y_hi - self.y_lo) * (PANEL_H - 1.75 * PAD)
    }

    fn axes(&self, out: &mut String, title: &str, x_ticks: bool) {
        let (l, r) = (self.x0 + PAD, self.x0 + PANEL_W - 0.5 * PAD);
        let (t, b) = (0.75 * PAD, PANEL_H - PAD);
        let _ = writeln!(
            out,
            r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            r - l,
            b - t
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"##,
            0.5 * (l + r),
            0.5 * PAD,
            escape(title)
        );
        let ticks = [
            (true, self.x_lo, "start", l, b + 14.0),
            (true, self.x_hi, "end", r, b + 14.0),
            (false, self.y_lo, "end", l - 3.0, b),
            (false, self.y_hi, "end", l - 3.0, t + 8.0),
        ];
        for (is_x, v, anchor, x, y) in ticks {
            if is_x && !x_ticks {
                continue;
            }
            let _ = writeln!(
                out,
                r##"<text x="{x:.2}" y="{y:.2}" font-size="9" text-anchor="{anchor}">{v:.3}</text>"##
            );
        }
    }

    fn polyline(&self, out: &mut String, xs: &[f64], ys: &[f64], style: &str) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", self.x(x), self.y(y.clamp(self.y_lo, self.y_hi))))
            .collect();
        let _ = writeln!(out, r##"<polyline fill="none" {style} points="{}"/>"##, pts.join(" "));
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn render_svg(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif">"##,
        3.0 * PANEL_W,
        PANEL_H
    );

    let c = &bundle.curves;
    let (t_lo, t_hi) = range(c.t.iter().copied());
    let (y_lo, y_hi) = range(c.phi_hat.iter().chain(&c.chosen).chain(&c.k1).copied());
    let f = Frame::new(0, (t_lo, t_hi), (y_lo.min(0.0), y_hi));
    f.axes(&mut out, "kernel: estimate vs fit", true);
    f.polyline(&mut out, &c.t, &c.phi_hat, r##"stroke="#999" stroke-width="1.5""##);
    f.polyline(&mut out, &c.t, &c.k1, r##"stroke="#2a7" stroke-dasharray="4 3""##);
    f.polyline(&mut out, &c.t, &c.chosen, r##"stroke="#c33" stroke-width="1.5""##);

    let audit = &bundle.result.audit;
    let (_, r_hi) = range(audit.iter().map(|a| a.fit.residue));
    let f = Frame::new(1, (0.0, audit.len() as f64), (0.0, r_hi));
    f.axes(&mut out, "L1 residues", false);
    let k1 = bundle.result.k1.fit.label();
    let k2 = bundle.result.k2.fit.label();
    for (i, a) in audit.iter().enumerate() {
        let x = f.x(i as f64 + 0.15);
        let w = f.x(i as f64 + 0.85) - x;
        let y = f.y(a.fit.residue);
        let fill = if a.label == k2 && i >= 4 {
            "#c33"
        } else if a.label == k1 && i < 4 {
            "#2a7"
        } else if a.fit.verdict.stationary {
            "#789"
        } else {
            "#ccc"
        };
        let _ = writeln!(
            out,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{:.2}" fill="{fill}"/>"##,
            f.y(0.0) - y
        );
        let _ = writeln!(
            out,
            r##"<text font-size="8" transform="translate({:.2},{:.2}) rotate(60)">{}</text>"##,
            x + 0.5 * w,
            f.y(0.0) + 4.0,
            escape(&a.label)
        );
    }

    let lg = |v: f64| v.max(1e-12).log10();
    let xs: Vec<f64> = bundle.qq.iter().map(|r| lg(r.exponential)).collect();
    let ys: Vec<f64> = bundle.qq.iter().map(|r| lg(r.model)).collect();
    let es: Vec<f64> = bundle.qq.iter().map(|r| r.estimate.map_or(f64::NAN, lg)).collect();
    let (lo, hi) = range(xs.iter().chain(&ys).chain(&es).copied());
    let f = Frame::new(2, (lo, hi), (lo, hi));
    f.axes(&mut out, "Q-Q (log10), unit exponential", true);
    f.polyline(
        &mut out,
        &[lo, hi],
        &[lo, hi],
        r##"stroke="#444" stroke-dasharray="2 2""##,
    );
    for (series, color) in [(&ys, "#c33"), (&es, "#999")] {
        for (&x, &y) in xs.iter().zip(series.iter()) {
            if y.is_finite() {
                let _ = writeln!(
                    out,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}"/>"##,
                    f.x(x),
                    f.y(y)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
