//! Log-domain quadrature, tail classification and 1-D extremum search.
//!
//! Integrands are supplied as their logarithm `f_log(u)` and may reach
//! `1e13`. [`log_integrate`] never exponentiates `f_log` directly: each panel
//! is a log-sum-exp over its nodes anchored at the panel maximum.
//!
//! Refinement is global. Every panel carries a coarse (3-node) and a fine
//! (5-node) estimate; their difference is the panel error. Each round bisects
//! every panel whose error exceeds its share `tol * I / n` of the budget, so
//! the panel holding the sharpest feature is always split first.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::logweight::{log_sum_exp, LogWeight};

const LN_4: f64 = 2.0 * LN_2;
/// Floor on panel width as a fraction of the whole interval.
const MIN_PANEL_FRACTION: f64 = 1e-30;
const MAX_PANELS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("integrand log is not finite at u = {u} (value {value})")]
    NonFinite { u: f64, value: f64 },
    #[error("unconverged: last estimates ln I = {previous} and {current}, relative error estimate {relative_error:e}")]
    Unconverged { previous: f64, current: f64, relative_error: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Trapezoid,
    Simpson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: Rule,
    pub initial_panels: usize,
    /// Maximum number of refinement rounds.
    pub max_refinements: usize,
    /// Target relative error of the integral, i.e. absolute error of its log.
    pub rel_tol_log: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rule: Rule::Simpson,
            initial_panels: 16,
            max_refinements: 400,
            rel_tol_log: 1e-10,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        if self.initial_panels < 8 {
            return Err(QuadratureError::InvalidSpec(format!(
                "initial_panels = {} (must be >= 8)",
                self.initial_panels
            )));
        }
        if self.max_refinements == 0 {
            return Err(QuadratureError::InvalidSpec("max_refinements must be positive".into()));
        }
        if !(self.rel_tol_log >= 1e-12) || !self.rel_tol_log.is_finite() {
            return Err(QuadratureError::InvalidSpec(format!(
                "rel_tol_log = {} (must be >= 1e-12)",
                self.rel_tol_log
            )));
        }
        Ok(())
    }
}

/// A converged integral with diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: LogWeight,
    /// Log of the estimated absolute error.
    pub log_error: f64,
    pub panels: usize,
    pub rounds: usize,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    /// `f_log` at a, a+h/4, a+h/2, a+3h/4, b.
    f: [f64; 5],
    fine: f64,
    log_err: f64,
}

impl Panel {
    fn new(rule: Rule, a: f64, b: f64, f: [f64; 5]) -> Self {
        let h = b - a;
        let (coarse, fine) = match rule {
            Rule::Simpson => (
                (h / 6.0).ln() + log_sum_exp(&[f[0], LN_4 + f[2], f[4]]),
                (h / 12.0).ln() + log_sum_exp(&[f[0], LN_4 + f[1], LN_2 + f[2], LN_4 + f[3], f[4]]),
            ),
            Rule::Trapezoid => (
                (h / 4.0).ln() + log_sum_exp(&[f[0], LN_2 + f[2], f[4]]),
                (h / 8.0).ln() + log_sum_exp(&[f[0], LN_2 + f[1], LN_2 + f[2], LN_2 + f[3], f[4]]),
            ),
        };
        Panel { a, b, f, fine, log_err: log_abs_diff(fine, coarse) }
    }

    fn splittable(&self, span: f64) -> bool {
        let h = self.b - self.a;
        let scale = self.a.abs().max(self.b.abs());
        0.5 * h >= MIN_PANEL_FRACTION * span && h / 8.0 > 4.0 * f64::EPSILON * scale
    }
}

/// `ln|e^x - e^y|`.
fn log_abs_diff(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if hi == lo {
        return f64::NEG_INFINITY;
    }
    hi + (-(lo - hi).exp_m1()).ln()
}

fn eval<F: Fn(f64) -> f64>(f_log: &F, u: f64) -> Result<f64, QuadratureError> {
    let value = f_log(u);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(QuadratureError::NonFinite { u, value })
    }
}

/// `ln ∫ exp(f_log(u)) du` over `[lo, hi]`.
pub fn log_integrate<F>(f_log: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<LogWeight, QuadratureError>
where
    F: Fn(f64) -> f64 + Sync,
{
    log_integrate_with(f_log, lo, hi, spec, Execution::default()).map(|i| i.value)
}

pub fn log_integrate_with<F>(
    f_log: F,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
    exec: Execution,
) -> Result<Integral, QuadratureError>
where
    F: Fn(f64) -> f64 + Sync,
{
    spec.validate()?;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(QuadratureError::InvalidInterval { lo, hi });
    }
    if lo == hi {
        return Ok(Integral { value: LogWeight::ZERO, log_error: f64::NEG_INFINITY, panels: 0, rounds: 0 });
    }

    let n = spec.initial_panels;
    let nodes = 4 * n;
    let us: Vec<f64> = (0..=nodes)
        .map(|j| if j == nodes { hi } else { lo + (hi - lo) * (j as f64 / nodes as f64) })
        .collect();
    let values: Vec<f64> = exec.map(&us, |&u| eval(&f_log, u)).into_iter().collect::<Result<_, _>>()?;
    let mut panels: Vec<Panel> = (0..n)
        .map(|i| {
            let j = 4 * i;
            let f = [values[j], values[j + 1], values[j + 2], values[j + 3], values[j + 4]];
            Panel::new(spec.rule, us[j], us[j + 4], f)
        })
        .collect();

    let log_tol = spec.rel_tol_log.ln();
    let mut previous = f64::NAN;
    let mut rounds = 0;
    loop {
        let fines: Vec<f64> = panels.iter().map(|p| p.fine).collect();
        let errs: Vec<f64> = panels.iter().map(|p| p.log_err).collect();
        let total = log_sum_exp(&fines);
        let error = log_sum_exp(&errs);
        if error - total <= log_tol || error == f64::NEG_INFINITY {
            return Ok(Integral {
                value: LogWeight::from_ln(total).map_err(|_| QuadratureError::NonFinite { u: lo, value: total })?,
                log_error: error,
                panels: panels.len(),
                rounds,
            });
        }
        let unconverged = || QuadratureError::Unconverged {
            previous,
            current: total,
            relative_error: (error - total).exp(),
        };
        if rounds >= spec.max_refinements || panels.len() >= MAX_PANELS {
            return Err(unconverged());
        }

        let threshold = total + log_tol - (panels.len() as f64).ln();
        let selected: Vec<usize> = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.log_err > threshold && p.splittable(hi - lo))
            .map(|(i, _)| i)
            .collect();
        if selected.is_empty() {
            return Err(unconverged());
        }

        let children = exec.map(&selected, |&i| bisect_panel(&f_log, spec.rule, &panels[i]));
        let mut next = Vec::with_capacity(panels.len() + selected.len());
        let mut pending = selected.iter().zip(children).peekable();
        for (i, panel) in panels.iter().enumerate() {
            match pending.peek() {
                Some((&j, _)) if j == i => {
                    let (_, pair) = pending.next().expect("peeked");
                    let (left, right) = pair?;
                    next.push(left);
                    next.push(right);
                }
                _ => next.push(*panel),
            }
        }
        panels = next;
        previous = total;
        rounds += 1;
    }
}

fn bisect_panel<F: Fn(f64) -> f64>(f_log: &F, rule: Rule, p: &Panel) -> Result<(Panel, Panel), QuadratureError> {
    let h = p.b - p.a;
    let mid = p.a + 0.5 * h;
    let l1 = eval(f_log, p.a + 0.125 * h)?;
    let l3 = eval(f_log, p.a + 0.375 * h)?;
    let r1 = eval(f_log, p.a + 0.625 * h)?;
    let r3 = eval(f_log, p.a + 0.875 * h)?;
    let f = p.f;
    Ok((
        Panel::new(rule, p.a, mid, [f[0], l1, f[1], l3, f[2]]),
        Panel::new(rule, mid, p.b, [f[2], r1, f[3], r3, f[4]]),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailVerdict {
    pub verdict: Verdict,
    /// Estimated limit of `d f_log / du`; NaN when the probe saw non-finite values.
    #[serde(serialize_with = "crate::report::ext_f64")]
    pub asymptotic_slope: f64,
}

/// Geometric probe `u_start * ratio^k` for `k = 0..points`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeGrid {
    pub ratio: f64,
    pub points: usize,
    pub slope_margin: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        ProbeGrid { ratio: 2.0, points: 41, slope_margin: 1e-3 }
    }
}

/// Classifies `∫^∞ exp(f_log)` by the exponential rate of the integrand.
///
/// The rate is the secant slope over the last two probe points. It must agree
/// with the preceding secant to within 10% (or the margin) to count as a
/// stable trend; otherwise the verdict is inconclusive.
pub fn classify_tail<F: Fn(f64) -> f64>(f_log: F, u_start: f64, probe: &ProbeGrid) -> TailVerdict {
    let inconclusive = |slope| TailVerdict { verdict: Verdict::Inconclusive, asymptotic_slope: slope };
    if !(u_start > 0.0) || !(probe.ratio > 1.0) || probe.points < 3 {
        return inconclusive(f64::NAN);
    }
    let mut us = Vec::with_capacity(probe.points);
    let mut u = u_start;
    for _ in 0..probe.points {
        us.push(u);
        u *= probe.ratio;
    }
    let values: Vec<f64> = us.iter().map(|&u| f_log(u)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return inconclusive(f64::NAN);
    }
    let secant = |i: usize| (values[i + 1] - values[i]) / (us[i + 1] - us[i]);
    let last = secant(us.len() - 2);
    let prev = secant(us.len() - 3);
    let margin = probe.slope_margin;
    if (last - prev).abs() > 0.1 * last.abs().max(margin) {
        return inconclusive(last);
    }
    let verdict = if last >= -margin { Verdict::Divergent } else { Verdict::Convergent };
    TailVerdict { verdict, asymptotic_slope: last }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

/// Golden-section search for a single extremum on `[lo, hi]`, falling back to
/// the better endpoint when the function is monotone there.
pub fn find_extremum<F: Fn(f64) -> f64>(f_log: F, lo: f64, hi: f64, kind: Extremum) -> (f64, f64) {
    let sign = match kind {
        Extremum::Min => 1.0,
        Extremum::Max => -1.0,
    };
    let g = |u: f64| sign * f_log(u);
    if !(hi > lo) {
        return (lo, f_log(lo));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let tol = 1e-9 * (hi - lo);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > tol {
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
        if c >= d {
            break;
        }
    }
    let interior = 0.5 * (a + b);
    let candidates = [(interior, g(interior)), (lo, g(lo)), (hi, g(hi))];
    let (u, best) = candidates
        .into_iter()
        .fold((f64::NAN, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
    (u, sign * best)
}
