//! Discrete world ensembles and the two weighting prescriptions.
//!
//! A single-history theory weights each world by its bare quantum measure.
//! A many-worlds theory weights each world by bare measure times the measure
//! of observations inside it, here `sum_k count_k * weight_k` over observer
//! classes. Inside one world, observational mass is split equally over the
//! world's tags.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logweight::{normalize, LogWeight, LogWeightError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("ensemble has no worlds")]
    Empty,
    #[error("duplicate world id {0:?}")]
    DuplicateId(String),
    #[error("world {0:?} has zero bare measure")]
    ZeroMeasure(String),
    #[error("world {world:?}, observer class {class:?}: weight {weight} must be finite and >= 0")]
    InvalidWeight { world: String, class: String, weight: f64 },
    #[error("world {world:?}, field {field}: {source}")]
    InvalidMagnitude {
        world: String,
        field: String,
        #[source]
        source: LogWeightError,
    },
    #[error("no observations exist in any world")]
    NoObservations,
    #[error("query {0} is not satisfiable under the many-worlds version")]
    Unsatisfiable(String),
    #[error(transparent)]
    LogWeight(#[from] LogWeightError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Version {
    SingleHistory,
    ManyWorlds,
}

impl Version {
    pub const ALL: [Version; 2] = [Version::SingleHistory, Version::ManyWorlds];
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Version::SingleHistory => "single-history",
            Version::ManyWorlds => "many-worlds",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverClass {
    pub label: String,
    /// Number of observations of this class in the world.
    pub count: LogWeight,
    /// Per-observation weighting factor.
    pub weight: f64,
}

impl ObserverClass {
    pub fn new(label: impl Into<String>, count: LogWeight) -> Self {
        ObserverClass { label: label.into(), count, weight: 1.0 }
    }

    fn measure(&self) -> LogWeight {
        if self.weight == 0.0 {
            return LogWeight::ZERO;
        }
        self.count.mul(LogWeight::from_value(self.weight).expect("weight validated"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub id: String,
    pub bare_measure: LogWeight,
    pub observers: Vec<ObserverClass>,
    pub tags: BTreeSet<String>,
}

impl World {
    pub fn new(id: impl Into<String>, bare_measure: LogWeight) -> Self {
        World { id: id.into(), bare_measure, observers: Vec::new(), tags: BTreeSet::new() }
    }

    pub fn with_observers(mut self, class: ObserverClass) -> Self {
        self.observers.push(class);
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.insert(tag.into());
        self
    }

    /// `sum_k count_k * weight_k`; zero when the world has no observers.
    pub fn observer_measure(&self) -> LogWeight {
        LogWeight::sum(self.observers.iter().map(ObserverClass::measure))
    }

    pub fn has_observers(&self) -> bool {
        !self.observer_measure().is_zero()
    }

    /// Share of this world's observations that satisfy `query`.
    fn query_share(&self, query: &Query) -> f64 {
        if self.tags.is_empty() {
            return if query.matches(None) { 1.0 } else { 0.0 };
        }
        let hits = self.tags.iter().filter(|t| query.matches(Some(t))).count();
        hits as f64 / self.tags.len() as f64
    }
}

/// Predicate over a single observation tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Any,
    Tag(String),
    NotTag(String),
}

impl Query {
    pub fn tag(tag: impl Into<String>) -> Self {
        Query::Tag(tag.into())
    }

    /// `None` is the content of an observation in an untagged world.
    fn matches(&self, tag: Option<&String>) -> bool {
        match self {
            Query::Any => true,
            Query::Tag(t) => tag == Some(t),
            Query::NotTag(t) => tag != Some(t),
        }
    }

    pub fn complement(&self) -> Option<Query> {
        match self {
            Query::Any => None,
            Query::Tag(t) => Some(Query::NotTag(t.clone())),
            Query::NotTag(t) => Some(Query::Tag(t.clone())),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Any => f.write_str("*"),
            Query::Tag(t) => f.write_str(t),
            Query::NotTag(t) => write!(f, "!{t}"),
        }
    }
}

/// Normalized probabilities keyed by world id, in ensemble order.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub entries: Vec<(String, LogWeight)>,
}

impl Distribution {
    pub fn get(&self, id: &str) -> Option<LogWeight> {
        self.entries.iter().find(|(k, _)| k == id).map(|(_, p)| *p)
    }

    pub fn total(&self) -> LogWeight {
        LogWeight::sum(self.entries.iter().map(|(_, p)| *p))
    }
}

/// Bayes factor of many-worlds over single-history for one observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LikelihoodRatio {
    Finite(LogWeight),
    /// The single-history version gives the observation zero probability.
    Infinite,
}

impl LikelihoodRatio {
    pub fn log10(&self) -> f64 {
        match self {
            LikelihoodRatio::Finite(w) => w.log10(),
            LikelihoodRatio::Infinite => f64::INFINITY,
        }
    }
}

/// A validated, nonempty collection of worlds.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    worlds: Vec<World>,
}

impl Ensemble {
    pub fn new(worlds: Vec<World>) -> Result<Self, EnsembleError> {
        if worlds.is_empty() {
            return Err(EnsembleError::Empty);
        }
        let mut seen = HashSet::new();
        for w in &worlds {
            if !seen.insert(w.id.as_str()) {
                return Err(EnsembleError::DuplicateId(w.id.clone()));
            }
            if w.bare_measure.is_zero() {
                return Err(EnsembleError::ZeroMeasure(w.id.clone()));
            }
            for c in &w.observers {
                if !(c.weight.is_finite() && c.weight >= 0.0) {
                    return Err(EnsembleError::InvalidWeight {
                        world: w.id.clone(),
                        class: c.label.clone(),
                        weight: c.weight,
                    });
                }
            }
        }
        Ok(Ensemble { worlds })
    }

    pub fn worlds(&self) -> &[World] {
        &self.worlds
    }

    fn distribution(&self, weights: Vec<LogWeight>) -> Result<Distribution, LogWeightError> {
        let probs = normalize(&weights)?;
        Ok(Distribution {
            entries: self.worlds.iter().map(|w| w.id.clone()).zip(probs).collect(),
        })
    }

    pub fn bare_distribution(&self) -> Distribution {
        self.distribution(self.worlds.iter().map(|w| w.bare_measure).collect())
            .expect("validated worlds have nonzero measure")
    }

    pub fn observational_distribution(&self) -> Result<Distribution, EnsembleError> {
        let weights = self
            .worlds
            .iter()
            .map(|w| w.bare_measure.mul(w.observer_measure()))
            .collect();
        self.distribution(weights).map_err(|_| EnsembleError::NoObservations)
    }

    pub fn existence_probability(&self, version: Version) -> LogWeight {
        let bare = self.bare_distribution();
        let with_observers = || {
            self.worlds
                .iter()
                .zip(&bare.entries)
                .filter(|(w, _)| w.has_observers())
                .map(|(_, (_, p))| *p)
        };
        match version {
            Version::SingleHistory => LogWeight::sum(with_observers()),
            Version::ManyWorlds => {
                if with_observers().next().is_some() {
                    LogWeight::ONE
                } else {
                    LogWeight::ZERO
                }
            }
        }
    }

    /// Probability that a random observation satisfies `query`.
    ///
    /// Single-history mass only counts worlds that contain observers; with
    /// `condition_on_existence` it is divided by the existence probability.
    pub fn typicality(
        &self,
        version: Version,
        query: &Query,
        condition_on_existence: bool,
    ) -> Result<LogWeight, EnsembleError> {
        let weighted = |dist: &Distribution, observers_only: bool| {
            LogWeight::sum(self.worlds.iter().zip(&dist.entries).filter_map(|(w, (_, p))| {
                if observers_only && !w.has_observers() {
                    return None;
                }
                let share = w.query_share(query);
                (share > 0.0).then(|| p.mul(LogWeight::from_value(share).expect("share in [0, 1]")))
            }))
        };
        match version {
            Version::ManyWorlds => Ok(weighted(&self.observational_distribution()?, false)),
            Version::SingleHistory => {
                let mass = weighted(&self.bare_distribution(), true);
                if !condition_on_existence {
                    return Ok(mass);
                }
                let existence = self.existence_probability(Version::SingleHistory);
                mass.ratio(existence).map_err(|_| EnsembleError::NoObservations)
            }
        }
    }

    /// Many-worlds typicality over unconditioned single-history typicality.
    pub fn likelihood_ratio(&self, query: &Query) -> Result<LikelihoodRatio, EnsembleError> {
        let mw = self.typicality(Version::ManyWorlds, query, false)?;
        if mw.is_zero() {
            return Err(EnsembleError::Unsatisfiable(query.to_string()));
        }
        let sh = self.typicality(Version::SingleHistory, query, false)?;
        Ok(match mw.ratio(sh) {
            Ok(r) => LikelihoodRatio::Finite(r),
            Err(_) => LikelihoodRatio::Infinite,
        })
    }

    /// Parses an ensemble definition file; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, EnsembleError> {
        let file: EnsembleFile = serde_json::from_str(text).map_err(|e| EnsembleError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let worlds = file
            .worlds
            .into_iter()
            .map(WorldFile::into_world)
            .collect::<Result<Vec<_>, _>>()?;
        Ensemble::new(worlds)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleFile {
    worlds: Vec<WorldFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    id: String,
    measure: Magnitude,
    #[serde(default)]
    observers: Vec<ObserverFile>,
    #[serde(default)]
    tags: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObserverFile {
    class: String,
    count: Magnitude,
    #[serde(default = "unit_weight")]
    weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

/// `{"value": x}` or `{"log10": x}`.
#[derive(Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum Magnitude {
    Value(f64),
    Log10(f64),
}

impl Magnitude {
    fn to_log_weight(&self) -> Result<LogWeight, LogWeightError> {
        match *self {
            Magnitude::Value(v) => LogWeight::from_value(v),
            Magnitude::Log10(x) if x.is_finite() => LogWeight::from_log10(x),
            Magnitude::Log10(x) => Err(LogWeightError::InvalidLog(x)),
        }
    }
}

impl WorldFile {
    fn into_world(self) -> Result<World, EnsembleError> {
        let invalid = |field: String| {
            let world = self.id.clone();
            move |source| EnsembleError::InvalidMagnitude { world, field, source }
        };
        let bare_measure = self.measure.to_log_weight().map_err(invalid("measure".into()))?;
        let observers = self
            .observers
            .iter()
            .map(|o| {
                Ok(ObserverClass {
                    label: o.class.clone(),
                    count: o.count.to_log_weight().map_err(invalid(format!("observers.{}.count", o.class)))?,
                    weight: o.weight,
                })
            })
            .collect::<Result<Vec<_>, EnsembleError>>()?;
        Ok(World {
            id: self.id.clone(),
            bare_measure,
            observers,
            tags: self.tags.iter().cloned().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lw10(x: f64) -> LogWeight {
        LogWeight::from_log10(x).unwrap()
    }

    fn toy1() -> Ensemble {
        Ensemble::new(vec![
            World::new("observers", LogWeight::from_value(0.0000000001).unwrap())
                .with_observers(ObserverClass::new("any", LogWeight::ONE)),
            World::new("empty", LogWeight::from_value(0.9999999999).unwrap()),
        ])
        .unwrap()
    }

    fn toy2() -> Ensemble {
        Ensemble::new(vec![
            World::new("A", LogWeight::ONE)
                .with_observers(ObserverClass::new("observer", lw10(10.0)))
                .with_tag("contracting"),
            World::new("B", lw10(-30.0))
                .with_observers(ObserverClass::new("observer", lw10(90.0)))
                .with_tag("expanding"),
        ])
        .unwrap()
    }

    #[test]
    fn bare_distributions() {
        let d = toy1().bare_distribution();
        assert!((d.get("observers").unwrap().log10() + 10.0).abs() < 1e-9);
        assert!((d.get("empty").unwrap().value() - (1.0 - 1e-10)).abs() < 1e-15);
        let d = toy2().bare_distribution();
        assert!((d.get("B").unwrap().log10() + 30.0).abs() < 1e-12);
        assert!(d.get("A").unwrap().ln().abs() < 1e-29);
        let single = Ensemble::new(vec![World::new("w", lw10(3.0))]).unwrap();
        assert_eq!(single.bare_distribution().entries[0].1, LogWeight::ONE);
    }

    #[test]
    fn observational_distributions() {
        let d = toy1().observational_distribution().unwrap();
        assert_eq!(d.get("observers").unwrap(), LogWeight::ONE);
        assert!(d.get("empty").unwrap().is_zero());
        let e = toy2();
        let weights: Vec<f64> = e
            .worlds()
            .iter()
            .map(|w| w.bare_measure.mul(w.observer_measure()).log10())
            .collect();
        assert!((weights[0] - 10.0).abs() < 1e-12 && (weights[1] - 60.0).abs() < 1e-12);
        let d = e.observational_distribution().unwrap();
        assert!((d.get("A").unwrap().log10() + 50.0).abs() < 1e-12);
        assert!(d.get("B").unwrap().ln().abs() < 1e-40);
        let none = Ensemble::new(vec![World::new("w", LogWeight::ONE)]).unwrap();
        assert_eq!(none.observational_distribution(), Err(EnsembleError::NoObservations));
    }

    #[test]
    fn existence() {
        let e = toy1();
        assert!((e.existence_probability(Version::SingleHistory).log10() + 10.0).abs() < 1e-9);
        assert_eq!(e.existence_probability(Version::ManyWorlds), LogWeight::ONE);
        assert!(toy2().existence_probability(Version::SingleHistory).ln().abs() < 1e-15);
        let none = Ensemble::new(vec![World::new("w", LogWeight::ONE)]).unwrap();
        assert!(none.existence_probability(Version::ManyWorlds).is_zero());
        assert!(none.existence_probability(Version::SingleHistory).is_zero());
    }

    #[test]
    fn typicality_toy2() {
        let e = toy2();
        let sh = e.typicality(Version::SingleHistory, &Query::tag("contracting"), false).unwrap();
        let expect = lw10(-30.0).complement().unwrap();
        assert!((sh.ln() - expect.ln()).abs() < 1e-12);
        let mw = e.typicality(Version::ManyWorlds, &Query::tag("expanding"), false).unwrap();
        assert!((mw.ln() - lw10(-50.0).complement().unwrap().ln()).abs() < 1e-12);
        let nothing = e.typicality(Version::ManyWorlds, &Query::tag("static"), false).unwrap();
        assert!(nothing.is_zero());
    }

    #[test]
    fn conditioned_typicality_divides_by_existence() {
        let e = Ensemble::new(vec![
            World::new("a", lw10(-10.0))
                .with_observers(ObserverClass::new("o", LogWeight::ONE))
                .with_tag("x"),
            World::new("b", LogWeight::ONE),
        ])
        .unwrap();
        let un = e.typicality(Version::SingleHistory, &Query::tag("x"), false).unwrap();
        let cond = e.typicality(Version::SingleHistory, &Query::tag("x"), true).unwrap();
        assert!((un.log10() + 10.0).abs() < 1e-9);
        assert!(cond.ln().abs() < 1e-12);
        let none = Ensemble::new(vec![World::new("w", LogWeight::ONE).with_tag("x")]).unwrap();
        assert_eq!(
            none.typicality(Version::ManyWorlds, &Query::tag("x"), false),
            Err(EnsembleError::NoObservations)
        );
        assert_eq!(
            none.typicality(Version::SingleHistory, &Query::tag("x"), true),
            Err(EnsembleError::NoObservations)
        );
    }

    #[test]
    fn likelihood_ratios() {
        let e = toy2();
        let up = e.likelihood_ratio(&Query::tag("expanding")).unwrap();
        assert!((up.log10() - 30.0).abs() < 1e-9);
        let down = e.likelihood_ratio(&Query::tag("contracting")).unwrap();
        assert!((down.log10() + 50.0).abs() < 1e-9);
        let single = Ensemble::new(vec![World::new("w", lw10(4.0))
            .with_observers(ObserverClass::new("o", lw10(2.0)))
            .with_tag("x")])
        .unwrap();
        assert_eq!(single.likelihood_ratio(&Query::tag("x")).unwrap(), LikelihoodRatio::Finite(LogWeight::ONE));
        // many-worlds mass on a world that single-history never sees with observers
        let lopsided = Ensemble::new(vec![
            World::new("a", LogWeight::ONE)
                .with_observers(ObserverClass::new("o", LogWeight::ONE))
                .with_tag("x"),
            World::new("b", LogWeight::ONE)
                .with_observers(ObserverClass { weight: 0.0, ..ObserverClass::new("o", LogWeight::ONE) })
                .with_tag("y"),
        ])
        .unwrap();
        assert!((lopsided.likelihood_ratio(&Query::tag("x")).unwrap().log10() - 2f64.log10()).abs() < 1e-15);
        assert!(matches!(e.likelihood_ratio(&Query::tag("none")), Err(EnsembleError::Unsatisfiable(_))));
    }

    #[test]
    fn untagged_worlds_only_match_negations() {
        let e = Ensemble::new(vec![World::new("w", LogWeight::ONE)
            .with_observers(ObserverClass::new("o", LogWeight::ONE))])
        .unwrap();
        assert!(e.typicality(Version::ManyWorlds, &Query::tag("x"), false).unwrap().is_zero());
        assert_eq!(e.typicality(Version::ManyWorlds, &Query::NotTag("x".into()), false).unwrap(), LogWeight::ONE);
        assert_eq!(e.typicality(Version::ManyWorlds, &Query::Any, false).unwrap(), LogWeight::ONE);
        assert_eq!(LikelihoodRatio::Infinite.log10(), f64::INFINITY);
    }

    #[test]
    fn multi_tag_worlds_split_equally() {
        let e = Ensemble::new(vec![World::new("w", LogWeight::ONE)
            .with_observers(ObserverClass::new("o", LogWeight::ONE))
            .with_tag("x")
            .with_tag("y")])
        .unwrap();
        let p = e.typicality(Version::ManyWorlds, &Query::tag("x"), false).unwrap();
        assert!((p.value() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert_eq!(Ensemble::new(vec![]), Err(EnsembleError::Empty));
        assert_eq!(
            Ensemble::new(vec![World::new("a", LogWeight::ONE), World::new("a", LogWeight::ONE)]),
            Err(EnsembleError::DuplicateId("a".into()))
        );
        assert_eq!(
            Ensemble::new(vec![World::new("a", LogWeight::ZERO)]),
            Err(EnsembleError::ZeroMeasure("a".into()))
        );
        let bad = World::new("a", LogWeight::ONE)
            .with_observers(ObserverClass { weight: -1.0, ..ObserverClass::new("o", LogWeight::ONE) });
        assert!(matches!(Ensemble::new(vec![bad]), Err(EnsembleError::InvalidWeight { .. })));
    }

    #[test]
    fn file_parsing() {
        let text = r#"{"worlds": [
            {"id": "A", "measure": {"value": 1}, "observers": [{"class": "h", "count": {"log10": 10}}], "tags": ["contracting"]},
            {"id": "B", "measure": {"log10": -30}, "observers": [{"class": "h", "count": {"log10": 90}, "weight": 2}], "tags": ["expanding"]}
        ]}"#;
        let e = Ensemble::from_json(text).unwrap();
        assert_eq!(e.worlds()[1].observers[0].weight, 2.0);
        assert!((e.worlds()[1].observer_measure().log10() - 90.0 - 2f64.log10()).abs() < 1e-12);

        let unknown = r#"{"worlds": [{"id": "A", "measure": {"value": 1}, "colour": "red"}]}"#;
        assert!(matches!(Ensemble::from_json(unknown), Err(EnsembleError::Parse { line: 1, .. })));
        let both = r#"{"worlds": [{"id": "A", "measure": {"value": 1, "log10": 0}}]}"#;
        assert!(matches!(Ensemble::from_json(both), Err(EnsembleError::Parse { .. })));
        assert_eq!(Ensemble::from_json(r#"{"worlds": []}"#), Err(EnsembleError::Empty));
        let negative = r#"{"worlds": [{"id": "A", "measure": {"value": -1}}]}"#;
        assert!(matches!(Ensemble::from_json(negative), Err(EnsembleError::InvalidMagnitude { .. })));
        let zero = r#"{"worlds": [{"id": "A", "measure": {"value": 0}}]}"#;
        assert_eq!(Ensemble::from_json(zero), Err(EnsembleError::ZeroMeasure("A".into())));
    }

    const TAGS: [&str; 3] = ["expanding", "contracting", "static"];

    fn arb_world(i: usize) -> impl Strategy<Value = World> {
        (
            -40.0..40.0f64,
            prop::option::of((-20.0..60.0f64, 0.0..3.0f64)),
            prop::collection::btree_set(0..3usize, 0..3),
        )
            .prop_map(move |(m, obs, tags)| {
                let mut w = World::new(format!("w{i}"), lw10(m));
                if let Some((c, weight)) = obs {
                    w.observers.push(ObserverClass { weight, ..ObserverClass::new("o", lw10(c)) });
                }
                w.tags = tags.into_iter().map(|t| TAGS[t].to_string()).collect();
                w
            })
    }

    fn arb_ensemble() -> impl Strategy<Value = Ensemble> {
        (1..6usize)
            .prop_flat_map(|n| (0..n).map(arb_world).collect::<Vec<_>>())
            .prop_map(|mut worlds| {
                worlds[0].observers = vec![ObserverClass::new("o", LogWeight::ONE)];
                Ensemble::new(worlds).unwrap()
            })
    }

    fn close(a: LogWeight, b: LogWeight) -> bool {
        a == b || (a.ln() - b.ln()).abs() <= 1e-12 * a.ln().abs().max(1.0) * 10.0
    }

    proptest! {
        #[test]
        fn rescaling_bare_measures_changes_nothing(e in arb_ensemble(), shift in -50.0..50.0f64) {
            let scaled = Ensemble::new(e.worlds().iter().cloned().map(|mut w| {
                w.bare_measure = w.bare_measure.mul(lw10(shift));
                w
            }).collect()).unwrap();
            for q in TAGS.iter().map(|t| Query::tag(*t)) {
                for v in Version::ALL {
                    prop_assert!(close(e.typicality(v, &q, false).unwrap(), scaled.typicality(v, &q, false).unwrap()));
                }
            }
            for ((_, a), (_, b)) in e.bare_distribution().entries.iter().zip(&scaled.bare_distribution().entries) {
                prop_assert!(close(*a, *b));
            }
        }

        #[test]
        fn constant_observer_measure_reproduces_bare(e in arb_ensemble(), c in -10.0..80.0f64) {
            let flat = Ensemble::new(e.worlds().iter().cloned().map(|mut w| {
                w.observers = vec![ObserverClass::new("o", lw10(c))];
                w
            }).collect()).unwrap();
            let bare = flat.bare_distribution();
            let obs = flat.observational_distribution().unwrap();
            for ((_, a), (_, b)) in bare.entries.iter().zip(&obs.entries) {
                prop_assert!(close(*a, *b));
            }
        }

        #[test]
        fn tag_and_complement_cover_existence(e in arb_ensemble(), t in 0..3usize) {
            let q = Query::tag(TAGS[t]);
            let not_q = q.complement().unwrap();
            for v in Version::ALL {
                let p = e.typicality(v, &q, false).unwrap();
                let r = e.typicality(v, &not_q, false).unwrap();
                prop_assert!(p.ln() <= 1e-12 && r.ln() <= 1e-12);
                let expect = match v {
                    Version::ManyWorlds => LogWeight::ONE,
                    Version::SingleHistory => e.existence_probability(v),
                };
                prop_assert!((p.add(r).ln() - expect.ln()).abs() < 1e-12);
            }
        }

        #[test]
        fn splitting_a_world_is_invisible_at_tag_level(e in arb_ensemble(), k in 0..6usize, t in 0..3usize) {
            let k = k % e.worlds().len();
            let mut worlds = Vec::new();
            for (i, w) in e.worlds().iter().enumerate() {
                if i == k {
                    let half = w.bare_measure.ratio(LogWeight::from_value(2.0).unwrap()).unwrap();
                    for part in ["a", "b"] {
                        let mut piece = w.clone();
                        piece.id = format!("{}-{part}", w.id);
                        piece.bare_measure = half;
                        worlds.push(piece);
                    }
                } else {
                    worlds.push(w.clone());
                }
            }
            let split = Ensemble::new(worlds).unwrap();
            let q = Query::tag(TAGS[t]);
            for v in Version::ALL {
                for cond in [false, true] {
                    let a = e.typicality(v, &q, cond).unwrap();
                    let b = split.typicality(v, &q, cond).unwrap();
                    prop_assert!(close(a, b), "{v} {cond}: {a:?} {b:?}");
                }
            }
            prop_assert!(close(
                e.existence_probability(Version::SingleHistory),
                split.existence_probability(Version::SingleHistory)
            ));
        }
    }
}
