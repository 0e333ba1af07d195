//! `lmlab`: run analyses of Finsler Lagrangians from the command line.
//!
//! Exit codes: 0 when every verdict passes, 1 on the first failing verdict,
//! 2 on input errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lmlab::atlas::{csv_header, AtlasRow, ConeAtlas};
use lmlab::catalogue::{self, CatalogueEntry};
use lmlab::checks::{checks, run_property, CheckConfig, CheckContext, Status};
use lmlab::lagrangian::{Domain, LagrangianSpec};
use lmlab::report::AnalysisReport;
use lmlab::sphere::{default_count, default_strategy, sample_sphere, SphereStrategy};
use lmlab::LabError;

#[derive(Parser)]
#[command(name = "lmlab", version, about = "Numerical laboratory for Lorentz-Finsler tangent spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write a report.
    Analyze {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run one property suite.
    Check {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
        /// One of the property names listed by `lmlab list`, or `all`.
        #[arg(long)]
        property: String,
    },
    /// Write labelled sphere samples (and level-set points) as CSV.
    Export {
        #[command(flatten)]
        source: SourceArgs,
        /// Add timelike points rescaled onto 2L = -c^2.
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, env = "LMLAB_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// List catalogue entries and property names.
    List,
}

#[derive(Args)]
struct SourceArgs {
    /// Catalogue name.
    name: Option<String>,
    #[arg(long, conflicts_with = "name")]
    builtin: Option<String>,
    /// Lagrangian in the expression language, in variables v0..v{dim-1}.
    #[arg(long, conflicts_with_all = ["name", "builtin"])]
    expr: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Parameter binding `name=value`; repeatable.
    #[arg(long = "param", alias = "params", value_delimiter = ',')]
    params: Vec<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// `all` (every nonzero vector) or `time-cone` (v0^2 > v1^2 + ...).
    #[arg(long, default_value = "all")]
    domain: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, env = "LMLAB_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    chords: Option<usize>,
    #[arg(long)]
    validity_samples: Option<usize>,
    #[arg(long)]
    dual_samples: Option<usize>,
    #[arg(long)]
    round_trips: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp so identical runs give identical bytes.
    #[arg(long)]
    deterministic: bool,
}

fn parse_params(source: &SourceArgs) -> Result<BTreeMap<String, f64>, LabError> {
    let mut out = BTreeMap::new();
    for p in &source.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| LabError::precondition(format!("parameter binding {p:?} is not name=value")))?;
        let x: f64 = v
            .trim()
            .parse()
            .map_err(|_| LabError::precondition(format!("parameter {k} has a non-numeric value {v:?}")))?;
        out.insert(k.trim().to_string(), x);
    }
    if let Some(a) = source.alpha {
        out.insert("alpha".into(), a);
    }
    Ok(out)
}

fn parse_domain(s: &str) -> Result<Domain, LabError> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "all" | "all-nonzero" => Ok(Domain::AllNonzero),
        "time-cone" | "timecone" => Ok(Domain::TimeCone),
        _ => Err(LabError::UnknownName(format!("domain {s}"))),
    }
}

fn resolve(source: &SourceArgs) -> Result<CatalogueEntry, LabError> {
    let params = parse_params(source)?;
    if let Some(text) = &source.expr {
        let dim = source
            .dim
            .ok_or_else(|| LabError::precondition("--expr needs --dim"))?;
        let spec = LagrangianSpec::from_dsl("expr", text, dim, &params, parse_domain(&source.domain)?)?;
        return Ok(CatalogueEntry::custom(spec, "user-supplied expression"));
    }
    let name = source
        .name
        .as_deref()
        .or(source.builtin.as_deref())
        .ok_or_else(|| LabError::precondition("give a catalogue name, --builtin or --expr"))?;
    let entry = catalogue::get(name)?.with_parameters(&params)?;
    if let Some(d) = source.dim {
        if d != entry.dimension() {
            return Err(LabError::precondition(format!(
                "{name} has dimension {}, not {d}",
                entry.dimension()
            )));
        }
    }
    Ok(entry)
}

fn parse_strategy(s: &Option<String>) -> Result<Option<SphereStrategy>, LabError> {
    s.as_deref().map(str::parse).transpose()
}

fn config(run: &RunArgs) -> Result<CheckConfig, LabError> {
    let mut c = CheckConfig {
        seed: run.seed,
        samples: run.samples,
        strategy: parse_strategy(&run.strategy)?,
        ..CheckConfig::default()
    };
    if let Some(n) = run.pairs {
        c.pairs = n;
    }
    if let Some(n) = run.chords {
        c.chords = n;
    }
    if let Some(n) = run.validity_samples {
        c.validity_samples = n;
    }
    if let Some(n) = run.dual_samples {
        c.dual_samples = n;
    }
    if let Some(n) = run.round_trips {
        c.round_trips = n;
    }
    Ok(c)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), LabError> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_suite(command: &str, source: &SourceArgs, run: &RunArgs, property: &str) -> Result<i32, LabError> {
    let entry = resolve(source)?;
    if property != "all" && !checks().iter().any(|c| c.name() == property) {
        return Err(LabError::UnknownName(format!("property {property}")));
    }
    let ctx = CheckContext::new(entry, config(run)?);
    let outcomes = run_property(&ctx, property)?;
    let report = AnalysisReport::assemble(command, &ctx, outcomes, run.deterministic);
    write_text(run.out.as_deref(), &report.to_json()?)?;
    for o in &report.outcomes {
        let status = match o.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skip",
        };
        let expected = match o.matches_expected {
            Some(true) => " (as expected)",
            Some(false) => " (unexpected)",
            None => "",
        };
        eprintln!("{:<12} {status:<5} {}{expected}", o.property, o.verdict);
    }
    if let Some(f) = &report.summary.first_failure {
        eprintln!("first failing verdict: {f}");
    }
    Ok(report.exit_code())
}

fn format_row(row: &AtlasRow) -> Vec<String> {
    let mut r: Vec<String> = row.v.iter().map(|x| x.to_string()).collect();
    r.push(row.two_l.map(|x| x.to_string()).unwrap_or_default());
    r.push(row.class.clone());
    r.push(row.component.to_string());
    r
}

fn export(
    source: &SourceArgs,
    level: Option<f64>,
    samples: Option<usize>,
    seed: u64,
    strategy: &Option<String>,
    out: &Path,
) -> Result<i32, LabError> {
    let entry = resolve(source)?;
    let spec = entry
        .spec()
        .ok_or_else(|| LabError::precondition(format!("{} is a metric field; nothing to export", entry.name)))?;
    let dim = spec.dimension();
    let strategy = parse_strategy(strategy)?.unwrap_or_else(|| default_strategy(dim));
    let sample = sample_sphere(dim, samples.unwrap_or_else(|| default_count(dim)), strategy, seed)?;
    let atlas = ConeAtlas::build(spec, sample)?;
    let mut w = csv::Writer::from_path(out).map_err(|e| LabError::Io(e.to_string()))?;
    let io = |e: csv::Error| LabError::Io(e.to_string());
    w.write_record(csv_header(dim)).map_err(io)?;
    for row in atlas.sample_rows() {
        w.write_record(format_row(&row)).map_err(io)?;
    }
    if let Some(c) = level {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(LabError::precondition("--level must be finite and non-negative"));
        }
        for row in atlas.level_rows(c) {
            w.write_record(format_row(&row)).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(0)
}

fn list() -> Result<i32, LabError> {
    println!("catalogue:");
    for name in catalogue::NAMES {
        let e = catalogue::get(name)?;
        println!("  {name:<14} dim {}  {}", e.dimension(), e.description);
    }
    println!("properties:");
    for c in checks() {
        println!("  {:<12} {}", c.name(), c.description());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze { source, run } => run_suite("analyze", source, run, "all"),
        Command::Check { source, run, property } => run_suite("check", source, run, property),
        Command::Export {
            source,
            level,
            samples,
            seed,
            strategy,
            out,
        } => export(source, *level, *samples, *seed, strategy, out),
        Command::List => list(),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
