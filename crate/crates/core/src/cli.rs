//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or parse error, 3 domain or
//! numeric error. Every failure writes a single `error[config]:` or
//! `error[domain]:` line to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{self, AnalysisError, Crossover, PeakReading, RegimeOptions, Split};
use crate::ensemble::{Ensemble, EnsembleError, Query, Version};
use crate::exec::Execution;
use crate::minisuperspace::{CapRule, MeasureKind, NoBoundaryModel, DEFAULT_U_CUT};
use crate::quadrature::QuadratureSpec;
use crate::report::{self, EnsembleReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "worldweight", version, about = "Single-history vs many-worlds observer weighting")]
pub struct Cli {
    /// Output format; defaults to csv for `scan` and text otherwise.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output to FILE instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Echoed in reports; reserved for future samplers.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distributions, existence, typicality and likelihood ratios for a world ensemble.
    Ensemble(EnsembleArgs),
    /// Tabulate the density and integrands over geometrically spaced u.
    Scan(ScanArgs),
    /// Peak/tail dominance report under a finite cap.
    Report(ReportArgs),
    /// Cap at which the observational tail overtakes the peak.
    Crossover(CrossoverArgs),
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Restrict to one theory version (default: both).
    #[arg(long, value_enum)]
    version: Option<Version>,
    /// Observation tag to query; repeatable. Prefix with `!` to negate.
    #[arg(long)]
    query: Vec<String>,
    #[arg(long)]
    condition_on_existence: bool,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Inflaton mass in Planck units.
    #[arg(long)]
    m: Option<f64>,
    /// Model definition file; flags given alongside it override its values.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    #[arg(long)]
    u_cut: Option<f64>,
    /// planck, none, or a fixed u value.
    #[arg(long)]
    cap: Option<CapRule>,
    #[arg(long, value_enum)]
    kind: Option<MeasureKind>,
}

#[derive(Args, Debug)]
struct QuadArgs {
    /// Target relative error of each integral.
    #[arg(long, default_value_t = QuadratureSpec::default().rel_tol_log)]
    rel_tol: f64,
    /// Run sequentially even when built with parallel support.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    u_min: Option<f64>,
    /// Defaults to 1000 A.
    #[arg(long)]
    u_max: Option<f64>,
    #[arg(long, default_value_t = 256)]
    points: usize,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    quad: QuadArgs,
    /// Region split point (default: interior minimum of the observational integrand).
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, value_enum, default_value_t = PeakReading::VolumeObservers)]
    peak_reading: PeakReading,
}

#[derive(Args, Debug)]
struct CrossoverArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Domain(String),
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::Domain(e.to_string())
    }
}

struct Output {
    body: String,
    /// Printed before failing with a domain error.
    failure: Option<Failure>,
}

impl ModelArgs {
    fn build(&self) -> Result<NoBoundaryModel, Failure> {
        let base = match &self.model {
            Some(path) => {
                let text = read(path)?;
                let parsed = NoBoundaryModel::from_json(&text)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                Some(parsed.map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?)
            }
            None => None,
        };
        let m = self
            .m
            .or(base.map(|b| b.m()))
            .ok_or_else(|| Failure::Config("--m or --model is required".into()))?;
        let u_cut = self.u_cut.or(base.map(|b| b.u_cut())).unwrap_or(DEFAULT_U_CUT);
        let cap = self.cap.or(base.map(|b| b.cap())).unwrap_or(CapRule::PlanckDensity);
        let kind = self.kind.or(base.map(|b| b.kind())).unwrap_or(MeasureKind::NoBoundary);
        NoBoundaryModel::new(m, u_cut, cap, kind).map_err(|e| Failure::Config(e.to_string()))
    }
}

impl QuadArgs {
    fn spec(&self) -> Result<QuadratureSpec, Failure> {
        let spec = QuadratureSpec { rel_tol_log: self.rel_tol, ..QuadratureSpec::default() };
        spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(spec)
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn parse_query(q: &str) -> Query {
    match q.strip_prefix('!') {
        Some(t) => Query::NotTag(t.to_string()),
        None if q == "*" => Query::Any,
        None => Query::tag(q),
    }
}

fn cmd_ensemble(args: &EnsembleArgs, format: Format, seed: Option<u64>) -> Result<Output, Failure> {
    if format == Format::Csv {
        return Err(Failure::Config("ensemble supports --format text|json".into()));
    }
    let text = read(&args.config)?;
    let ensemble = Ensemble::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let observational = ensemble.observational_distribution().ok();
    let mut rep = EnsembleReport::new(&ensemble, observational.as_ref(), seed);
    let versions: Vec<Version> = args.version.map_or(Version::ALL.to_vec(), |v| vec![v]);

    let mut failure = None;
    for q in args.query.iter().map(|q| parse_query(q)) {
        for &v in &versions {
            let conditioned = args.condition_on_existence && v == Version::SingleHistory;
            match ensemble.typicality(v, &q, conditioned) {
                Ok(p) => rep.push_typicality(v, &q, conditioned, p),
                Err(e) => {
                    failure.get_or_insert(Failure::Domain(format!("query {q}, {v}: {e}")));
                }
            }
        }
        match ensemble.likelihood_ratio(&q) {
            Ok(r) => rep.push_ratio(&q, r),
            Err(EnsembleError::Unsatisfiable(_)) | Err(EnsembleError::NoObservations) => {}
            Err(e) => return Err(Failure::Domain(e.to_string())),
        }
    }
    let body = match format {
        Format::Json => json(&rep),
        _ => rep.to_text(),
    };
    Ok(Output { body, failure })
}

fn cmd_scan(args: &ScanArgs, format: Format) -> Result<Output, Failure> {
    let model = args.model.build()?;
    if args.points == 0 {
        return Err(Failure::Config("--points must be positive".into()));
    }
    let u_min = args.u_min.unwrap_or(model.u_cut());
    let u_max = args.u_max.unwrap_or(1e3 * model.amplitude_exponent());
    let exec = if args.sequential { Execution::Sequential } else { Execution::default() };
    let rows = model
        .scan(u_min, u_max, args.points, exec)
        .map_err(|e| Failure::Domain(e.to_string()))?;
    let body = match format {
        Format::Json => json(&rows),
        _ => report::scan_csv(&rows),
    };
    Ok(Output { body, failure: None })
}

#[derive(serde::Serialize)]
struct ReportRecord<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(flatten)]
    report: &'a analysis::RegimeReport,
    predictions: &'a analysis::Predictions,
}

fn cmd_report(args: &ReportArgs, format: Format, seed: Option<u64>) -> Result<Output, Failure> {
    if format == Format::Csv {
        return Err(Failure::Config("report supports --format text|json".into()));
    }
    let model = args.model.build()?;
    let spec = args.quad.spec()?;
    let options = RegimeOptions {
        split: args.split.map_or(Split::Auto, Split::At),
        peak_reading: args.peak_reading,
    };
    let rep = match analysis::regime_report_with(&model, &spec, options, args.quad.exec()) {
        Ok(r) => r,
        Err(AnalysisError::Unbounded { divergence }) => {
            let body = match format {
                Format::Json => json(&serde_json::json!({ "model": model, "divergence": divergence })),
                _ => report::divergence_text(&divergence.bare, &divergence.observational) + "\n",
            };
            let err = AnalysisError::Unbounded { divergence };
            return Ok(Output { body, failure: Some(err.into()) });
        }
        Err(e) => return Err(e.into()),
    };
    let predictions = analysis::predictions_from(&rep);
    let body = match format {
        Format::Json => json(&ReportRecord { seed, report: &rep, predictions: &predictions }),
        _ => {
            let mut s = seed.map_or(String::new(), |s| format!("seed: {s}\n"));
            s.push_str(&report::regime_text(&rep, &predictions));
            s
        }
    };
    Ok(Output { body, failure: None })
}

fn cmd_crossover(args: &CrossoverArgs, format: Format, seed: Option<u64>) -> Result<Output, Failure> {
    if format == Format::Csv {
        return Err(Failure::Config("crossover supports --format text|json".into()));
    }
    let model = args.model.build()?;
    let spec = args.quad.spec()?;
    let c = analysis::crossover_cap_with(&model, &spec, args.quad.exec())?;
    let body = match format {
        Format::Json => {
            let u = match c {
                Crossover::At(u) => serde_json::json!(u),
                Crossover::NoCrossover => serde_json::json!("none"),
            };
            let mut v = serde_json::json!({ "model": model, "crossover_u": u });
            if let Some(seed) = seed {
                v["seed"] = seed.into();
            }
            json(&v)
        }
        _ => seed.map_or(String::new(), |s| format!("seed: {s}\n")) + &report::crossover_text(&c),
    };
    Ok(Output { body, failure: None })
}

fn dispatch(cli: &Cli) -> Result<Output, Failure> {
    let format = |default| cli.format.unwrap_or(default);
    match &cli.command {
        Command::Ensemble(a) => cmd_ensemble(a, format(Format::Text), cli.seed),
        Command::Scan(a) => cmd_scan(a, format(Format::Csv)),
        Command::Report(a) => cmd_report(a, format(Format::Text), cli.seed),
        Command::Crossover(a) => cmd_crossover(a, format(Format::Text), cli.seed),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let _ = writeln!(stderr, "error[config]: {first}");
            return EXIT_CONFIG;
        }
    };
    let fail = |stderr: &mut dyn Write, f: Failure| match f {
        Failure::Config(msg) => {
            let _ = writeln!(stderr, "error[config]: {}", one_line(&msg));
            EXIT_CONFIG
        }
        Failure::Domain(msg) => {
            let _ = writeln!(stderr, "error[domain]: {}", one_line(&msg));
            EXIT_DOMAIN
        }
    };
    let output = match dispatch(&cli) {
        Ok(o) => o,
        Err(f) => return fail(stderr, f),
    };
    let written = match &cli.out {
        Some(path) => fs::write(path, &output.body).map_err(|e| format!("{}: {e}", path.display())),
        None => stdout.write_all(output.body.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        return fail(stderr, Failure::Config(e));
    }
    match output.failure {
        Some(f) => fail(stderr, f),
        None => EXIT_OK,
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}
