//! Observer-weighted world ensembles and the no-boundary minisuperspace measure.
//!
//! * [`logweight`] carries magnitudes as natural logs so `1e-30`, `1e90` and
//!   `exp(1.4e13)` coexist without overflow.
//! * [`ensemble`] implements single-history (bare measure) and many-worlds
//!   (bare measure times observation measure) weighting over discrete worlds.
//! * [`minisuperspace`] evaluates the tree-level measure density in
//!   `u = ln(m^3 V)`.
//! * [`quadrature`] integrates log-integrands and classifies divergent tails.
//! * [`analysis`] compares the near-cutoff peak with the large-volume tail
//!   under both weightings.
//!
//! Data-parallel loops (quadrature panels, region integrals, scans) run on
//! rayon when the `parallel` feature is enabled; see [`exec::Execution`].

pub mod analysis;
pub mod cli;
pub mod ensemble;
pub mod exec;
pub mod logweight;
pub mod minisuperspace;
pub mod quadrature;
pub mod report;
pub mod solve;

pub use analysis::{RegimeOptions, RegimeReport};
pub use ensemble::{Ensemble, Query, Version, World};
pub use exec::Execution;
pub use logweight::LogWeight;
pub use minisuperspace::{CapRule, MeasureKind, NoBoundaryModel, Weighting};
pub use quadrature::{QuadratureSpec, Rule};
