//! Peak-versus-tail dominance of the bare and observational measures.
//!
//! The capped range `[u_cut, cap]` is split at a watershed `u_split`, by
//! default the interior minimum of the no-boundary observational
//! log-integrand. Below it lies the enormous peak near the cutoff (short-lived
//! universes whose observers, if any, live near recollapse); above it lies
//! the large-volume tail. The single-history prediction follows whichever
//! region dominates the bare measure; the many-worlds prediction follows the
//! observational measure.

use std::f64::consts::LN_10;

use serde::Serialize;
use thiserror::Error;

use crate::ensemble::{Ensemble, EnsembleError, ObserverClass, World};
use crate::exec::Execution;
use crate::logweight::LogWeight;
use crate::minisuperspace::{CapRule, MeasureKind, ModelError, NoBoundaryModel, Weighting};
use crate::quadrature::{
    classify_tail, find_extremum, log_integrate_with, Extremum, ProbeGrid, QuadratureError, QuadratureSpec,
    TailVerdict,
};
use crate::report::ext_f64;

pub const TAG_SMALL_SHORT_LIVED: &str = "small-short-lived";
pub const TAG_CONTRACTING_EPOCH: &str = "contracting-epoch";
pub const TAG_EXPANDING_LARGE: &str = "expanding-large";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("unbounded model: masses are infinite (bare tail {}, observational tail {}); use the divergence verdict", .divergence.bare.verdict_name(), .divergence.observational.verdict_name())]
    Unbounded { divergence: Divergence },
    #[error("split u = {split} outside [{u_cut}, {cap}]")]
    InvalidSplit { split: f64, u_cut: f64, cap: f64 },
    #[error("invalid bin edges: {0}")]
    InvalidBins(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

impl TailVerdict {
    fn verdict_name(&self) -> &'static str {
        match self.verdict {
            crate::quadrature::Verdict::Convergent => "convergent",
            crate::quadrature::Verdict::Divergent => "divergent",
            crate::quadrature::Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Split {
    #[default]
    Auto,
    At(f64),
}

/// How observers populate the peak region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PeakReading {
    /// Observers proportional to volume everywhere; peak universes host a few
    /// late, recollapsing-epoch observers.
    #[default]
    VolumeObservers,
    /// Peak universes are too short-lived to host any observers.
    NoObservers,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RegimeOptions {
    pub split: Split,
    pub peak_reading: PeakReading,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Peak,
    Tail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictedTag {
    SmallShortLived,
    ContractingEpoch,
    ExpandingLarge,
}

impl PredictedTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictedTag::SmallShortLived => TAG_SMALL_SHORT_LIVED,
            PredictedTag::ContractingEpoch => TAG_CONTRACTING_EPOCH,
            PredictedTag::ExpandingLarge => TAG_EXPANDING_LARGE,
        }
    }
}

/// Region masses for one weighting, each up to the model-wide additive constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightingSummary {
    pub peak_region: (f64, f64),
    pub tail_region: (f64, f64),
    #[serde(serialize_with = "ext_f64")]
    pub log_mass_peak: f64,
    #[serde(serialize_with = "ext_f64")]
    pub log_mass_tail: f64,
    pub dominant: Region,
    /// `log10(dominant / other)`, always >= 0.
    #[serde(serialize_with = "ext_f64")]
    pub log10_dominance_ratio: f64,
}

impl WeightingSummary {
    fn new(peak_region: (f64, f64), tail_region: (f64, f64), peak: LogWeight, tail: LogWeight) -> Self {
        let (dominant, hi, lo) = if peak >= tail { (Region::Peak, peak, tail) } else { (Region::Tail, tail, peak) };
        let ratio = if lo.is_zero() { f64::INFINITY } else { (hi.ln() - lo.ln()) / LN_10 };
        WeightingSummary {
            peak_region,
            tail_region,
            log_mass_peak: peak.ln(),
            log_mass_tail: tail.ln(),
            dominant,
            log10_dominance_ratio: ratio,
        }
    }

    fn mass(x: f64) -> LogWeight {
        LogWeight::from_ln(x).expect("masses are finite or -inf")
    }

    /// Share of the capped mass in the tail region.
    pub fn tail_fraction(&self) -> LogWeight {
        let tail = Self::mass(self.log_mass_tail);
        tail.ratio(tail.add(Self::mass(self.log_mass_peak))).expect("total mass is nonzero")
    }

    pub fn peak_fraction(&self) -> LogWeight {
        let peak = Self::mass(self.log_mass_peak);
        peak.ratio(peak.add(Self::mass(self.log_mass_tail))).expect("total mass is nonzero")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VersionTags {
    pub single_history: PredictedTag,
    pub many_worlds: PredictedTag,
}

/// Tail verdicts for the uncapped integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Divergence {
    pub bare: TailVerdict,
    pub observational: TailVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    pub model: NoBoundaryModel,
    pub split_u: f64,
    pub peak_reading: PeakReading,
    pub bare: WeightingSummary,
    pub observational: WeightingSummary,
    pub predicted_tag: VersionTags,
    pub divergence: Divergence,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VersionPrediction {
    pub predicted_tag: PredictedTag,
    /// log10 probability of observing an expanding, large universe.
    #[serde(serialize_with = "ext_f64")]
    pub likelihood_log10: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Predictions {
    pub single_history: VersionPrediction,
    pub many_worlds: VersionPrediction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossover {
    At(f64),
    NoCrossover,
}

fn capped(model: &NoBoundaryModel) -> Result<f64, AnalysisError> {
    model
        .cap_u()?
        .ok_or(AnalysisError::Unbounded { divergence: divergence(model) })
}

/// Interior minimum of the no-boundary observational log-integrand on
/// `[u_cut, upper]`. The same watershed is used for both measure kinds so
/// their regions coincide.
pub fn watershed(model: &NoBoundaryModel, upper: f64) -> f64 {
    let nb = model.with_kind(MeasureKind::NoBoundary);
    let f = |u: f64| nb.log_integrand_unchecked(u, Weighting::Observational);
    find_extremum(f, model.u_cut(), upper, Extremum::Min).0
}

pub fn auto_split(model: &NoBoundaryModel) -> Result<f64, AnalysisError> {
    Ok(watershed(model, capped(model)?))
}

pub fn divergence(model: &NoBoundaryModel) -> Divergence {
    let probe = ProbeGrid::default();
    let verdict = |w| classify_tail(|u| model.log_integrand_unchecked(u, w), model.u_cut(), &probe);
    Divergence { bare: verdict(Weighting::Bare), observational: verdict(Weighting::Observational) }
}

fn integrate(
    model: &NoBoundaryModel,
    weighting: Weighting,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
    exec: Execution,
) -> Result<LogWeight, QuadratureError> {
    if lo == hi {
        return Ok(LogWeight::ZERO);
    }
    // integrate in the distance from the larger endpoint
    let (fa, fb) = (model.log_integrand_unchecked(lo, weighting), model.log_integrand_unchecked(hi, weighting));
    let (anchor, f_anchor, dir) = if fa >= fb { (lo, fa, 1.0) } else { (hi, fb, -1.0) };
    let f = |t: f64| model.log_integrand_offset(anchor, dir * t, weighting);
    let rest = log_integrate_with(f, 0.0, hi - lo, spec, exec)?.value;
    Ok(LogWeight::from_ln(f_anchor).map_err(|_| QuadratureError::NonFinite { u: anchor, value: f_anchor })?.mul(rest))
}

fn resolve_split(model: &NoBoundaryModel, cap: f64, split: Split) -> Result<f64, AnalysisError> {
    match split {
        Split::Auto => Ok(watershed(model, cap)),
        Split::At(u) if u >= model.u_cut() && u <= cap => Ok(u),
        Split::At(u) => Err(AnalysisError::InvalidSplit { split: u, u_cut: model.u_cut(), cap }),
    }
}

pub fn regime_report(
    model: &NoBoundaryModel,
    spec: &QuadratureSpec,
    options: RegimeOptions,
) -> Result<RegimeReport, AnalysisError> {
    regime_report_with(model, spec, options, Execution::default())
}

pub fn regime_report_with(
    model: &NoBoundaryModel,
    spec: &QuadratureSpec,
    options: RegimeOptions,
    exec: Execution,
) -> Result<RegimeReport, AnalysisError> {
    let cap = capped(model)?;
    let split = resolve_split(model, cap, options.split)?;
    let peak_region = (model.u_cut(), split);
    let tail_region = (split, cap);
    let no_peak_observers = options.peak_reading == PeakReading::NoObservers;

    let jobs = [
        (Weighting::Bare, peak_region),
        (Weighting::Bare, tail_region),
        (Weighting::Observational, peak_region),
        (Weighting::Observational, tail_region),
    ];
    let masses = exec.map(&jobs, |&(w, (lo, hi))| {
        if no_peak_observers && w == Weighting::Observational && (lo, hi) == peak_region {
            return Ok(LogWeight::ZERO);
        }
        integrate(model, w, lo, hi, spec, exec)
    });
    let masses = masses.into_iter().collect::<Result<Vec<_>, _>>()?;

    let bare = WeightingSummary::new(peak_region, tail_region, masses[0], masses[1]);
    let observational = WeightingSummary::new(peak_region, tail_region, masses[2], masses[3]);
    let peak_tag = if no_peak_observers { PredictedTag::SmallShortLived } else { PredictedTag::ContractingEpoch };
    let tag = |s: &WeightingSummary| match s.dominant {
        Region::Peak => peak_tag,
        Region::Tail => PredictedTag::ExpandingLarge,
    };
    Ok(RegimeReport {
        model: *model,
        split_u: split,
        peak_reading: options.peak_reading,
        bare,
        observational,
        predicted_tag: VersionTags { single_history: tag(&bare), many_worlds: tag(&observational) },
        divergence: divergence(model),
    })
}

/// Per-version predicted tag and likelihood of observing a large expanding universe.
pub fn predictions(
    model: &NoBoundaryModel,
    spec: &QuadratureSpec,
    options: RegimeOptions,
) -> Result<Predictions, AnalysisError> {
    Ok(predictions_from(&regime_report(model, spec, options)?))
}

pub fn predictions_from(report: &RegimeReport) -> Predictions {
    Predictions {
        single_history: VersionPrediction {
            predicted_tag: report.predicted_tag.single_history,
            likelihood_log10: report.bare.tail_fraction().log10(),
        },
        many_worlds: VersionPrediction {
            predicted_tag: report.predicted_tag.many_worlds,
            likelihood_log10: report.observational.tail_fraction().log10(),
        },
    }
}

/// Cap value at which the observational tail mass overtakes the peak mass.
///
/// The model's own cap is ignored; the search runs over fixed caps in
/// `(watershed, 10 A]`.
pub fn crossover_cap(model: &NoBoundaryModel, spec: &QuadratureSpec) -> Result<Crossover, AnalysisError> {
    crossover_cap_with(model, spec, Execution::default())
}

pub fn crossover_cap_with(
    model: &NoBoundaryModel,
    spec: &QuadratureSpec,
    exec: Execution,
) -> Result<Crossover, AnalysisError> {
    let upper = 10.0 * model.amplitude_exponent();
    if !(upper > model.u_cut()) {
        return Ok(Crossover::NoCrossover);
    }
    let surplus = |cap: f64| -> Result<f64, AnalysisError> {
        let m = model.with_cap(CapRule::FixedU(cap))?;
        let r = regime_report_with(&m, spec, RegimeOptions::default(), exec)?;
        Ok(r.observational.log_mass_tail - r.observational.log_mass_peak)
    };
    // below the watershed the tail region is empty
    let mut lo = watershed(model, upper);
    let mut hi = upper;
    if surplus(hi)? <= 0.0 {
        return Ok(Crossover::NoCrossover);
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if surplus(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Crossover::At(0.5 * (lo + hi)))
}

/// Bins `[edges[i], edges[i+1]]` as worlds.
///
/// Each world's bare measure is the bin's bare mass and its single observer
/// class counts `observational mass / bare mass`, so the ensemble's
/// observational distribution reproduces the continuous one. Bins ending at
/// or below the watershed are tagged as peak outcomes, the rest
/// `expanding-large`.
pub fn discretize(
    model: &NoBoundaryModel,
    bin_edges: &[f64],
    spec: &QuadratureSpec,
    options: RegimeOptions,
) -> Result<Ensemble, AnalysisError> {
    discretize_with(model, bin_edges, spec, options, Execution::default())
}

pub fn discretize_with(
    model: &NoBoundaryModel,
    bin_edges: &[f64],
    spec: &QuadratureSpec,
    options: RegimeOptions,
    exec: Execution,
) -> Result<Ensemble, AnalysisError> {
    if bin_edges.len() < 2 {
        return Err(AnalysisError::InvalidBins("need at least two edges".into()));
    }
    if bin_edges.iter().any(|e| !e.is_finite()) || bin_edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::InvalidBins("edges must be finite and strictly increasing".into()));
    }
    let first = bin_edges[0];
    let last = *bin_edges.last().expect("len >= 2");
    let cap = model.cap_u()?;
    if first < model.u_cut() || cap.is_some_and(|c| last > c) {
        return Err(AnalysisError::InvalidBins(format!(
            "edges [{first}, {last}] leave [{}, {}]",
            model.u_cut(),
            cap.map_or("inf".to_string(), |c| c.to_string())
        )));
    }
    let split = resolve_split(model, cap.unwrap_or(last), options.split)?;
    let no_peak_observers = options.peak_reading == PeakReading::NoObservers;

    let bins: Vec<(f64, f64)> = bin_edges.windows(2).map(|w| (w[0], w[1])).collect();
    let masses = exec.map(&bins, |&(lo, hi)| -> Result<(LogWeight, LogWeight), QuadratureError> {
        let (bare, obs) = exec.join(
            || integrate(model, Weighting::Bare, lo, hi, spec, exec),
            || integrate(model, Weighting::Observational, lo, hi, spec, exec),
        );
        Ok((bare?, obs?))
    });

    let mut worlds = Vec::with_capacity(bins.len());
    for (i, (&(lo, hi), mass)) in bins.iter().zip(masses).enumerate() {
        let (bare, obs) = mass?;
        let in_peak = hi <= split * (1.0 + 1e-12);
        let count = if in_peak && no_peak_observers { LogWeight::ZERO } else { obs.ratio(bare).map_err(EnsembleError::from)? };
        let tag = match (in_peak, no_peak_observers) {
            (true, true) => TAG_SMALL_SHORT_LIVED,
            (true, false) => TAG_CONTRACTING_EPOCH,
            (false, _) => TAG_EXPANDING_LARGE,
        };
        worlds.push(
            World::new(format!("bin-{i}"), bare)
                .with_observers(ObserverClass::new("volume", count))
                .with_tag(tag),
        );
        debug_assert!(lo < hi);
    }
    Ok(Ensemble::new(worlds)?)
}
