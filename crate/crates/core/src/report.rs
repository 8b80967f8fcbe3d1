//! Human-readable and machine-readable renderings.

use std::fmt::Write as _;

use serde::Serializer;

use crate::analysis::{Crossover, Predictions, RegimeReport, WeightingSummary};
use crate::ensemble::{Distribution, Ensemble, LikelihoodRatio, Query, Version};
use crate::logweight::{significant, LogWeight};
use crate::minisuperspace::ScanRow;
use crate::quadrature::TailVerdict;

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`.
pub fn ext_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// One typicality result for the ensemble report.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TypicalityRecord {
    pub version: Version,
    pub query: String,
    pub condition_on_existence: bool,
    #[serde(serialize_with = "ext_f64")]
    pub probability_log10: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RatioRecord {
    pub query: String,
    /// `"inf"` when single-history gives the observation zero probability.
    #[serde(serialize_with = "ext_f64")]
    pub likelihood_ratio_log10: f64,
    pub infinite: bool,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DistributionRecord {
    pub id: String,
    #[serde(serialize_with = "ext_f64")]
    pub bare_log10: f64,
    #[serde(serialize_with = "ext_f64")]
    pub observational_log10: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct EnsembleReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub distributions: Vec<DistributionRecord>,
    pub existence_log10: ExistenceRecord,
    pub typicality: Vec<TypicalityRecord>,
    pub likelihood_ratios: Vec<RatioRecord>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ExistenceRecord {
    #[serde(serialize_with = "ext_f64")]
    pub single_history: f64,
    #[serde(serialize_with = "ext_f64")]
    pub many_worlds: f64,
}

fn log_and_sci(w: LogWeight) -> String {
    format!("{} (log10 {})", w, significant(w.log10(), 9))
}

impl EnsembleReport {
    /// Everything but typicality; the latter may fail and is appended by the caller.
    pub fn new(ensemble: &Ensemble, observational: Option<&Distribution>, seed: Option<u64>) -> Self {
        let bare = ensemble.bare_distribution();
        let distributions = bare
            .entries
            .iter()
            .map(|(id, p)| DistributionRecord {
                id: id.clone(),
                bare_log10: p.log10(),
                observational_log10: observational.and_then(|d| d.get(id)).map_or(f64::NAN, |p| p.log10()),
            })
            .collect();
        EnsembleReport {
            seed,
            distributions,
            existence_log10: ExistenceRecord {
                single_history: ensemble.existence_probability(Version::SingleHistory).log10(),
                many_worlds: ensemble.existence_probability(Version::ManyWorlds).log10(),
            },
            typicality: Vec::new(),
            likelihood_ratios: Vec::new(),
        }
    }

    pub fn push_typicality(&mut self, version: Version, query: &Query, conditioned: bool, p: LogWeight) {
        self.typicality.push(TypicalityRecord {
            version,
            query: query.to_string(),
            condition_on_existence: conditioned,
            probability_log10: p.log10(),
        });
    }

    pub fn push_ratio(&mut self, query: &Query, ratio: LikelihoodRatio) {
        self.likelihood_ratios.push(RatioRecord {
            query: query.to_string(),
            likelihood_ratio_log10: ratio.log10(),
            infinite: ratio == LikelihoodRatio::Infinite,
        });
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed: {seed}");
        }
        let _ = writeln!(out, "{:<20} {:>28} {:>28}", "world", "bare", "observational");
        for d in &self.distributions {
            let obs = if d.observational_log10.is_nan() {
                "n/a".to_string()
            } else {
                log_and_sci(LogWeight::from_log10(d.observational_log10).expect("probability"))
            };
            let _ = writeln!(
                out,
                "{:<20} {:>28} {:>28}",
                d.id,
                log_and_sci(LogWeight::from_log10(d.bare_log10).expect("probability")),
                obs
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "existence probability");
        for (name, v) in [
            ("single-history", self.existence_log10.single_history),
            ("many-worlds", self.existence_log10.many_worlds),
        ] {
            let _ = writeln!(out, "  {name:<16} {}", log_and_sci(LogWeight::from_log10(v).expect("probability")));
        }
        if !self.typicality.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "typicality");
            for t in &self.typicality {
                let cond = if t.condition_on_existence { " | observers exist" } else { "" };
                let _ = writeln!(
                    out,
                    "  {:<16} {:<16} {}{}",
                    t.version.to_string(),
                    t.query,
                    log_and_sci(LogWeight::from_log10(t.probability_log10).expect("probability")),
                    cond
                );
            }
        }
        if !self.likelihood_ratios.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "likelihood ratio (many-worlds / single-history)");
            for r in &self.likelihood_ratios {
                let shown = if r.infinite {
                    "infinite".to_string()
                } else {
                    log_and_sci(LogWeight::from_log10(r.likelihood_ratio_log10).expect("finite ratio"))
                };
                let _ = writeln!(out, "  {:<16} {}", r.query, shown);
            }
        }
        out
    }
}

fn verdict_text(v: &TailVerdict) -> String {
    let name = serde_json::to_value(v.verdict).ok().and_then(|x| x.as_str().map(str::to_owned)).unwrap_or_default();
    format!("{name} (asymptotic slope {})", significant(v.asymptotic_slope, 6))
}

fn ratio_text(x: f64) -> String {
    if x.is_finite() {
        significant(x, 6)
    } else {
        "inf".into()
    }
}

fn weighting_rows(out: &mut String, name: &str, s: &WeightingSummary) {
    let _ = writeln!(
        out,
        "{:<14} {:>16} {:>16} {:>9} {:>14}",
        name,
        ratio_text(s.log_mass_peak),
        ratio_text(s.log_mass_tail),
        serde_json::to_value(s.dominant).ok().and_then(|x| x.as_str().map(str::to_owned)).unwrap_or_default(),
        ratio_text(s.log10_dominance_ratio)
    );
}

pub fn regime_text(r: &RegimeReport, predictions: &Predictions) -> String {
    let mut out = String::new();
    let m = &r.model;
    let _ = writeln!(
        out,
        "model: m = {}, u_cut = {}, cap = {}, kind = {}",
        m.m(),
        m.u_cut(),
        m.cap(),
        m.kind()
    );
    let _ = writeln!(
        out,
        "regions: peak [{}, {}], tail [{}, {}]",
        significant(r.bare.peak_region.0, 9),
        significant(r.bare.peak_region.1, 9),
        significant(r.bare.tail_region.0, 9),
        significant(r.bare.tail_region.1, 9)
    );
    let _ = writeln!(out, "log masses are natural logs up to one model-wide additive constant");
    let _ = writeln!(
        out,
        "{:<14} {:>16} {:>16} {:>9} {:>14}",
        "weighting", "log_mass_peak", "log_mass_tail", "dominant", "log10_ratio"
    );
    weighting_rows(&mut out, "bare", &r.bare);
    weighting_rows(&mut out, "observational", &r.observational);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<16} {:<20} log10 P(expanding-large)", "version", "predicted_tag");
    for (name, p) in [("single-history", &predictions.single_history), ("many-worlds", &predictions.many_worlds)] {
        let _ = writeln!(out, "{:<16} {:<20} {}", name, p.predicted_tag.as_str(), significant(p.likelihood_log10, 9));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "uncapped bare integral:          {}", verdict_text(&r.divergence.bare));
    let _ = writeln!(out, "uncapped observational integral: {}", verdict_text(&r.divergence.observational));
    out
}

pub fn divergence_text(bare: &TailVerdict, observational: &TailVerdict) -> String {
    format!(
        "uncapped bare integral: {}; uncapped observational integral: {}",
        verdict_text(bare),
        verdict_text(observational)
    )
}

pub fn crossover_text(c: &Crossover) -> String {
    match c {
        Crossover::At(u) => format!("crossover cap u = {}\n", significant(*u, 9)),
        Crossover::NoCrossover => "no crossover in range\n".to_string(),
    }
}

pub const SCAN_HEADER: &str = "u,log_bare_density,log_integrand_bare,log_integrand_observational";

/// CSV with nine significant digits per value.
pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SCAN_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:.8e},{:.8e},{:.8e},{:.8e}",
            r.u, r.log_bare_density, r.log_integrand_bare, r.log_integrand_observational
        );
    }
    out
}
