//! Tree-level no-boundary (and tunneling) measure density over universe size.
//!
//! All continuous work uses `u = ln(m^3 V)`; `V` itself reaches
//! `exp(1.4e13)` for realistic masses and is never formed. The bare density
//! is
//!
//! ```text
//! ln mu(u) = A / (u + 1.5 ln u),    A = 4.5 pi / m^2
//! ```
//!
//! with the sign flipped for the tunneling variant. Proportionality constants
//! (powers of `m` in the Jacobian, the constant in `a0 ~ 1/(m phi0)`, the
//! constant in observers `~ V`) are set to one. They are shared by every
//! integrand of one model, so log-masses are only meaningful up to one
//! model-wide additive constant, and every ratio is exact.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::solve::{bisect, safeguarded_newton};

/// Potential `m^2 phi0^2 / 2` at the Planck density.
const PLANCK_POTENTIAL: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("inflaton mass must satisfy 0 < m < 1, got {0}")]
    InvalidMass(f64),
    #[error("u_cut = {u_cut} must exceed the formula floor {u_floor}")]
    CutoffBelowFloor { u_cut: f64, u_floor: f64 },
    #[error("cap u = {cap} must exceed u_cut = {u_cut}")]
    CapBelowCutoff { cap: f64, u_cut: f64 },
    #[error("u = {u} is below the cutoff u_cut = {u_cut}")]
    BelowCutoff { u: f64, u_cut: f64 },
    #[error("u = {u} is outside formula validity (u must exceed {u_floor})")]
    OutsideValidity { u: f64, u_floor: f64 },
    #[error("phi0 = {0} is below inflationary cutoff")]
    BelowInflationaryCutoff(f64),
    #[error("scan needs at least one point")]
    NoPoints,
    #[error("invalid scan range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("root solve failed: {0}")]
    Solve(#[from] crate::solve::SolveError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    NoBoundary,
    Tunneling,
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureKind::NoBoundary => "no-boundary",
            MeasureKind::Tunneling => "tunneling",
        })
    }
}

/// Upper limit on `u` beyond which the tree-level density is not trusted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CapRule {
    Unbounded,
    /// Initial potential at the Planck density: `m^2 phi0^2 / 2 = 1`.
    PlanckDensity,
    FixedU(f64),
}

impl fmt::Display for CapRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapRule::Unbounded => f.write_str("none"),
            CapRule::PlanckDensity => f.write_str("planck"),
            CapRule::FixedU(u) => write!(f, "{u}"),
        }
    }
}

impl Serialize for CapRule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CapRule::Unbounded => s.serialize_str("none"),
            CapRule::PlanckDensity => s.serialize_str("planck"),
            CapRule::FixedU(u) => {
                let mut map = s.serialize_map(Some(1))?;
                map.serialize_entry("fixed_u", u)?;
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for CapRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct CapVisitor;

        impl<'de> Visitor<'de> for CapVisitor {
            type Value = CapRule;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(r#""none", "planck" or {"fixed_u": number}"#)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<CapRule, E> {
                match v {
                    "none" => Ok(CapRule::Unbounded),
                    "planck" => Ok(CapRule::PlanckDensity),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<CapRule, A::Error> {
                let mut fixed = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "fixed_u" if fixed.is_none() => fixed = Some(map.next_value::<f64>()?),
                        "fixed_u" => return Err(de::Error::duplicate_field("fixed_u")),
                        other => return Err(de::Error::unknown_field(other, &["fixed_u"])),
                    }
                }
                fixed
                    .map(CapRule::FixedU)
                    .ok_or_else(|| de::Error::missing_field("fixed_u"))
            }
        }

        d.deserialize_any(CapVisitor)
    }
}

impl std::str::FromStr for CapRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(CapRule::Unbounded),
            "planck" => Ok(CapRule::PlanckDensity),
            other => other
                .parse::<f64>()
                .map(CapRule::FixedU)
                .map_err(|_| format!("expected planck, none or a number, got {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Bare,
    Observational,
}

/// Parameters of the continuous minisuperspace measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoBoundaryModel {
    m: f64,
    u_cut: f64,
    cap: CapRule,
    kind: MeasureKind,
}

pub const DEFAULT_U_CUT: f64 = 1.0;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    m: f64,
    #[serde(default)]
    u_cut: Option<f64>,
    #[serde(default)]
    cap: Option<CapRule>,
    #[serde(default)]
    kind: Option<MeasureKind>,
}

impl NoBoundaryModel {
    pub fn new(m: f64, u_cut: f64, cap: CapRule, kind: MeasureKind) -> Result<Self, ModelError> {
        if !(m > 0.0 && m < 1.0) {
            return Err(ModelError::InvalidMass(m));
        }
        let floor = u_floor();
        if !(u_cut > floor) || !u_cut.is_finite() {
            return Err(ModelError::CutoffBelowFloor { u_cut, u_floor: floor });
        }
        let model = NoBoundaryModel { m, u_cut, cap, kind };
        if let Some(cap) = model.cap_u()? {
            if !(cap > u_cut) || !cap.is_finite() {
                return Err(ModelError::CapBelowCutoff { cap, u_cut });
            }
        }
        Ok(model)
    }

    /// No-boundary kind, `u_cut = 1`, Planck-density cap.
    pub fn with_mass(m: f64) -> Result<Self, ModelError> {
        Self::new(m, DEFAULT_U_CUT, CapRule::PlanckDensity, MeasureKind::NoBoundary)
    }

    /// Parses `{"m": .., "u_cut": .., "cap": .., "kind": ..}`; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Result<Self, ModelError>, serde_json::Error> {
        let file: ModelFile = serde_json::from_str(text)?;
        Ok(Self::new(
            file.m,
            file.u_cut.unwrap_or(DEFAULT_U_CUT),
            file.cap.unwrap_or(CapRule::PlanckDensity),
            file.kind.unwrap_or(MeasureKind::NoBoundary),
        ))
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn u_cut(&self) -> f64 {
        self.u_cut
    }

    pub fn cap(&self) -> CapRule {
        self.cap
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn with_cap(&self, cap: CapRule) -> Result<Self, ModelError> {
        Self::new(self.m, self.u_cut, cap, self.kind)
    }

    pub fn with_kind(&self, kind: MeasureKind) -> Self {
        NoBoundaryModel { kind, ..*self }
    }

    /// `A = 4.5 pi / m^2`.
    pub fn amplitude_exponent(&self) -> f64 {
        4.5 * PI / (self.m * self.m)
    }

    pub fn u_floor(&self) -> f64 {
        u_floor()
    }

    /// Natural log of the bare density at `u`.
    pub fn log_bare_density(&self, u: f64) -> Result<f64, ModelError> {
        self.check_domain(u)?;
        Ok(self.log_bare_density_unchecked(u))
    }

    pub fn log_integrand(&self, u: f64, weighting: Weighting) -> Result<f64, ModelError> {
        self.check_domain(u)?;
        Ok(self.log_integrand_unchecked(u, weighting))
    }

    /// The density formula without domain checks; callers guarantee `u >= u_cut`.
    pub(crate) fn log_bare_density_unchecked(&self, u: f64) -> f64 {
        let exponent = self.amplitude_exponent() / denominator(u);
        match self.kind {
            MeasureKind::NoBoundary => exponent,
            MeasureKind::Tunneling => -exponent,
        }
    }

    /// Bare: density plus the Jacobian `dV = V du` (one `u`). Observational:
    /// one further factor of `V` for observers proportional to volume.
    pub(crate) fn log_integrand_unchecked(&self, u: f64, weighting: Weighting) -> f64 {
        let density = self.log_bare_density_unchecked(u);
        match weighting {
            Weighting::Bare => density + u,
            Weighting::Observational => density + 2.0 * u,
        }
    }

    /// `f(anchor + t) - f(anchor)` for the log-integrand `f`, formed from
    /// differences so it stays accurate when `f` itself is huge.
    pub(crate) fn log_integrand_offset(&self, anchor: f64, t: f64, weighting: Weighting) -> f64 {
        let ga = denominator(anchor);
        let dg = t + 1.5 * (t / anchor).ln_1p();
        let dn = -self.amplitude_exponent() * dg / (ga * (ga + dg));
        let density = match self.kind {
            MeasureKind::NoBoundary => dn,
            MeasureKind::Tunneling => -dn,
        };
        match weighting {
            Weighting::Bare => density + t,
            Weighting::Observational => density + 2.0 * t,
        }
    }

    fn check_domain(&self, u: f64) -> Result<(), ModelError> {
        let floor = u_floor();
        if !(u > floor) {
            return Err(ModelError::OutsideValidity { u, u_floor: floor });
        }
        if u < self.u_cut {
            return Err(ModelError::BelowCutoff { u, u_cut: self.u_cut });
        }
        Ok(())
    }

    /// The `u` at which a universe with initial inflaton value `phi0` ends inflation.
    pub fn phi0_to_u(&self, phi0: f64) -> Result<f64, ModelError> {
        let target = 4.5 * phi0 * phi0;
        if !(phi0 > 0.0) || !(target > 0.0) || !target.is_finite() {
            return Err(ModelError::BelowInflationaryCutoff(phi0));
        }
        solve_denominator(target)
    }

    /// Nucleation radius `a0 = 1/(m phi0)` and log-weight `pi a0^2`.
    pub fn nucleation_radius(&self, phi0: f64) -> (f64, f64) {
        let a0 = 1.0 / (self.m * phi0);
        (a0, PI * a0 * a0)
    }

    /// `None` when unbounded.
    pub fn cap_u(&self) -> Result<Option<f64>, ModelError> {
        match self.cap {
            CapRule::Unbounded => Ok(None),
            CapRule::FixedU(u) => Ok(Some(u)),
            CapRule::PlanckDensity => {
                // 4.5 phi0^2 at phi0 = sqrt(2 V_planck) / m
                let target = 4.5 * 2.0 * PLANCK_POTENTIAL / (self.m * self.m);
                solve_denominator(target).map(Some)
            }
        }
    }

    /// Table of the density and both integrands at geometrically spaced `u`.
    pub fn scan(&self, u_min: f64, u_max: f64, points: usize, exec: Execution) -> Result<Vec<ScanRow>, ModelError> {
        if points == 0 {
            return Err(ModelError::NoPoints);
        }
        if !(u_min.is_finite() && u_max.is_finite()) || u_max < u_min || (points > 1 && u_max == u_min) {
            return Err(ModelError::InvalidRange { lo: u_min, hi: u_max });
        }
        self.check_domain(u_min)?;
        let grid = geometric_grid(u_min, u_max, points);
        Ok(exec.map(&grid, |&u| ScanRow {
            u,
            log_bare_density: self.log_bare_density_unchecked(u),
            log_integrand_bare: self.log_integrand_unchecked(u, Weighting::Bare),
            log_integrand_observational: self.log_integrand_unchecked(u, Weighting::Observational),
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub u: f64,
    pub log_bare_density: f64,
    pub log_integrand_bare: f64,
    pub log_integrand_observational: f64,
}

/// `points` values from `lo` to `hi` inclusive with a constant ratio.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi / lo).ln() / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i == points - 1 {
                        hi
                    } else {
                        lo * (step * i as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[inline]
fn denominator(u: f64) -> f64 {
    u + 1.5 * u.ln()
}

/// Root of `u + 1.5 ln u = target` above the floor; the left side is increasing.
fn solve_denominator(target: f64) -> Result<f64, ModelError> {
    // just below the floor so the bracket holds even for a vanishing target
    let lo = u_floor() * (1.0 - 1e-9);
    let hi = if target < 1.0 { 1.0 } else { target + 1.0 };
    let u = safeguarded_newton(|u| denominator(u) - target, |u| 1.0 + 1.5 / u, lo, hi, 1e-14)?;
    Ok(u)
}

/// Root of `u + 1.5 ln u = 0` on (0, 1), where the density exponent changes sign.
pub fn u_floor() -> f64 {
    static FLOOR: OnceLock<f64> = OnceLock::new();
    *FLOOR.get_or_init(|| bisect(denominator, 0.1, 1.0, 1e-12).expect("u + 1.5 ln u changes sign on [0.1, 1]"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(m: f64) -> NoBoundaryModel {
        NoBoundaryModel::with_mass(m).unwrap()
    }

    #[test]
    fn amplitude_exponent_values() {
        let a = model(1e-6).amplitude_exponent();
        assert!((a - 14_137_166_941_154.069_573).abs() <= 4.0 * a * f64::EPSILON);
        assert!((a / 1.4137167e13 - 1.0).abs() < 5e-8);
        assert!((model(1e-2).amplitude_exponent() / 1.4137e5 - 1.0).abs() < 1e-4);
        // m = 1 sits outside the validated regime; the formula itself gives 4.5 pi.
        let unit = NoBoundaryModel { m: 1.0, ..model(0.5) };
        assert!((unit.amplitude_exponent() - 14.137_166_941_154_069).abs() < 1e-12);
    }

    #[test]
    fn floor_root() {
        let u = u_floor();
        assert!(u > 0.648 && u < 0.650, "{u}");
        assert!(denominator(u).abs() < 1e-10);
        assert_eq!(model(1e-6).u_floor(), model(1e-2).u_floor());
    }

    #[test]
    fn density_values() {
        let m6 = model(1e-6);
        let a = m6.amplitude_exponent();
        assert_eq!(m6.log_bare_density(1.0).unwrap(), a);
        let flat = m6.log_bare_density(a).unwrap();
        assert!(flat < 1.0 && 1.0 - flat < 1e-11 && 1.0 - flat > 0.0, "{flat}");
        let t = m6.with_kind(MeasureKind::Tunneling);
        assert_eq!(t.log_bare_density(1.0).unwrap(), -a);
    }

    #[test]
    fn density_domain_errors() {
        let m = NoBoundaryModel::new(1e-2, 2.0, CapRule::PlanckDensity, MeasureKind::NoBoundary).unwrap();
        assert_eq!(
            m.log_bare_density(1.5),
            Err(ModelError::BelowCutoff { u: 1.5, u_cut: 2.0 })
        );
        assert!(matches!(m.log_bare_density(0.5), Err(ModelError::OutsideValidity { .. })));
        assert!(matches!(
            NoBoundaryModel::new(1e-2, 0.6, CapRule::PlanckDensity, MeasureKind::NoBoundary),
            Err(ModelError::CutoffBelowFloor { .. })
        ));
        assert!(matches!(NoBoundaryModel::with_mass(1.0), Err(ModelError::InvalidMass(_))));
        assert!(matches!(
            NoBoundaryModel::new(1e-2, 1.0, CapRule::FixedU(0.9), MeasureKind::NoBoundary),
            Err(ModelError::CapBelowCutoff { .. })
        ));
    }

    #[test]
    fn integrand_values() {
        let m = model(1e-2);
        let a = m.amplitude_exponent();
        assert_eq!(m.log_integrand(1.0, Weighting::Bare).unwrap(), a + 1.0);
        let cap = m.cap_u().unwrap().unwrap();
        let obs = m.log_integrand(cap, Weighting::Observational).unwrap();
        // A / (9 / m^2) = pi / 2 at the cap root
        assert!((obs - (PI / 2.0 + 2.0 * cap)).abs() < 1e-9);
        assert!((obs / 1.7997e5 - 1.0).abs() < 1e-4);
        for u in [1.0, 3.7, 1e3, 1e7] {
            let d = m.log_integrand(u, Weighting::Observational).unwrap() - m.log_integrand(u, Weighting::Bare).unwrap();
            assert!((d - u).abs() <= 1e-9 * u.max(1.0) + 1e-9 * a);
        }
    }

    #[test]
    fn phi0_mapping() {
        let m = model(1e-2);
        let u = m.phi0_to_u(1.0).unwrap();
        assert!((u - 2.90).abs() < 0.01, "{u}");
        assert!((denominator(u) - 4.5).abs() < 1e-12);
        assert!(m.phi0_to_u(2.0).unwrap() > u);
        assert!(matches!(m.phi0_to_u(0.0), Err(ModelError::BelowInflationaryCutoff(_))));
        assert!(matches!(m.phi0_to_u(-1.0), Err(ModelError::BelowInflationaryCutoff(_))));
        for mass in [1e-2, 1e-6] {
            let m = model(mass);
            for phi0 in [0.7, 1.0, 3.0, 10.0, 1e3] {
                let u = m.phi0_to_u(phi0).unwrap();
                let back = m.log_bare_density(u).unwrap() * mass * mass * phi0 * phi0;
                assert!((back - PI).abs() < 1e-10, "m={mass} phi0={phi0}: {back}");
            }
        }
    }

    #[test]
    fn nucleation_radius_values() {
        let m = model(1e-6);
        let (a0, lw) = m.nucleation_radius(2f64.sqrt() / 1e-6);
        assert!((a0 - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((lw - PI / 2.0).abs() < 1e-12);
        let (a0, lw) = m.nucleation_radius(1.0);
        assert!((a0 - 1e6).abs() < 1e-6);
        assert!((lw / (PI * 1e12) - 1.0).abs() < 1e-14);
        let (_, doubled) = m.nucleation_radius(2.0);
        assert!((doubled * 4.0 / lw - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cap_values() {
        let m = model(1e-2);
        let cap = m.cap_u().unwrap().unwrap();
        let approx = 9e4 - 1.5 * 9e4f64.ln();
        assert!((cap - approx).abs() < 1e-2, "{cap} vs {approx}");
        assert!((cap - m.phi0_to_u(2f64.sqrt() / 1e-2).unwrap()).abs() < 1e-9 * cap);
        for mass in [0.9, 0.5, 1e-1, 1e-3, 1e-6] {
            let m = model(mass);
            assert!(m.cap_u().unwrap().unwrap() < m.amplitude_exponent());
        }
        assert_eq!(m.with_cap(CapRule::FixedU(5.0)).unwrap().cap_u().unwrap(), Some(5.0));
        assert_eq!(m.with_cap(CapRule::Unbounded).unwrap().cap_u().unwrap(), None);
    }

    #[test]
    fn model_json() {
        let m = NoBoundaryModel::from_json(r#"{"m": 0.01, "cap": {"fixed_u": 50}, "kind": "tunneling"}"#)
            .unwrap()
            .unwrap();
        assert_eq!(m.cap(), CapRule::FixedU(50.0));
        assert_eq!(m.kind(), MeasureKind::Tunneling);
        assert_eq!(m.u_cut(), 1.0);
        let echo = serde_json::to_string(&m).unwrap();
        assert_eq!(echo, r#"{"m":0.01,"u_cut":1.0,"cap":{"fixed_u":50.0},"kind":"tunneling"}"#);
        assert!(NoBoundaryModel::from_json(r#"{"m": 0.01, "extra": 1}"#).is_err());
        assert!(NoBoundaryModel::from_json(r#"{"m": 0.01, "cap": "sometimes"}"#).is_err());
        let none = NoBoundaryModel::from_json(r#"{"m": 0.01, "cap": "none"}"#).unwrap().unwrap();
        assert_eq!(none.cap(), CapRule::Unbounded);
    }

    #[test]
    fn bare_density_strictly_decreasing() {
        for mass in [1e-2, 1e-6] {
            let m = model(mass);
            let grid = geometric_grid(m.u_cut(), 1e3 * m.amplitude_exponent(), 10_000);
            let values: Vec<f64> = grid.iter().map(|&u| m.log_bare_density(u).unwrap()).collect();
            assert!(values.windows(2).all(|w| w[1] < w[0]));
            assert!(*values.last().unwrap() < 1.1e-3);
            let t = m.with_kind(MeasureKind::Tunneling);
            for (&u, &v) in grid.iter().zip(&values).step_by(97) {
                assert_eq!(t.log_bare_density(u).unwrap(), -v);
            }
        }
    }

    #[test]
    fn scan_rows() {
        let m = model(1e-2);
        let rows = m.scan(1.0, 1e5, 512, Execution::default()).unwrap();
        assert_eq!(rows.len(), 512);
        assert!(rows.windows(2).all(|w| w[1].log_bare_density < w[0].log_bare_density));
        let one = m.scan(1.0, 1.0, 1, Execution::Sequential).unwrap();
        assert_eq!(one[0].log_bare_density, m.amplitude_exponent());
        assert_eq!(m.scan(1.0, 2.0, 0, Execution::Sequential), Err(ModelError::NoPoints));
        assert!(matches!(m.scan(0.9, 2.0, 4, Execution::Sequential), Err(ModelError::BelowCutoff { .. })));
    }
}
