use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radonlaw::analysis::{waiting_time_bounds, CheckReport};
use radonlaw::config::{DatumSpec, ExperimentConfig, FluxSpec, GridSpec, SnapshotSpec};
use radonlaw::exact::ExactSolution;
use radonlaw::measure::{Grid, RadonMeasure};
use radonlaw::recipes::{self, RECIPES};
use radonlaw::solver::{GridSolution, NumericalFlux};
use radonlaw::Error;
use serde_json::json;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "radonlaw",
    version,
    about = "Scalar conservation laws with measure-valued initial data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scheme at each regularization level and write trajectories.
    Simulate(ExperimentArgs),
    /// Run a named recipe or the checks listed in a configuration.
    Verify(VerifyArgs),
    /// Sample the closed-form solution for power fluxes.
    Exact(ExactArgs),
    /// Tabulate waiting times or singular mass across flux exponents.
    Sweep(SweepArgs),
    /// List the available recipes.
    Recipes,
}

#[derive(Args, Clone, Default)]
struct ExperimentArgs {
    /// JSON configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Flux, e.g. `power:-1`, `exp:1`, `log`, `loglog`, `linear:0.5`, `drifted:0.2:power:-1`.
    #[arg(long)]
    flux: Option<FluxSpec>,
    /// Datum parts, e.g. `dirac:0:1` or `box:0:0.5:2`; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    datum: Vec<DatumSpec>,
    /// Regularization levels.
    #[arg(long = "n", value_delimiter = ',')]
    levels: Vec<u64>,
    /// Final time.
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_max: Option<f64>,
    #[arg(long)]
    dx: Option<f64>,
    /// Number of uniformly spaced snapshots.
    #[arg(long)]
    snapshots: Option<usize>,
    #[arg(long)]
    checks: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long, value_enum)]
    numerical_flux: Option<SchemeArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    UpwindGodunov,
    EngquistOsher,
}

#[derive(Args)]
struct VerifyArgs {
    /// Recipe name or `all`; without it the configuration's checks run.
    #[arg(long)]
    recipe: Option<String>,
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Also write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ExactArgs {
    /// Flux exponent `p` of `φ(u) = sgn(p)[(1+u)^p − 1]`.
    #[arg(long, allow_hyphen_values = true)]
    p: f64,
    /// Times, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
    /// Positions as `start:stop:step` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    xs: String,
    /// Pulse data `(n/2)·1[0, 2/n)` instead of a unit atom.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Quantity {
    T0,
    SingularMass,
}

#[derive(Args)]
struct SweepArgs {
    /// Flux exponents, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    p: Vec<f64>,
    #[arg(long, value_enum)]
    quantity: Quantity,
    /// Mass of the atom at the origin.
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    /// Times for `singular-mass`.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.25,0.5,0.75,1,1.25,1.5"
    )]
    times: Vec<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

enum Failure {
    Checks,
    Error(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("RADONLAW_WORKERS") {
        match v.parse::<usize>() {
            Ok(k) if k > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global();
            }
            _ => {
                eprintln!("error: RADONLAW_WORKERS must be a positive integer, got '{v}'");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Verify(a) => verify(&a),
        Command::Exact(a) => exact(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Recipes => list_recipes(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

macro_rules! to_json {
    ($v:expr) => {
        serde_json::to_value($v).expect("serializable configuration value")
    };
}

fn load_config(a: &ExperimentArgs) -> radonlaw::Result<ExperimentConfig> {
    let mut value = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| Error::Config(e.to_string()))?
        }
        None => json!({}),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("configuration must be a JSON object".into()))?;
    if let Some(f) = &a.flux {
        obj.insert("flux".into(), to_json!(f));
    }
    if !a.datum.is_empty() {
        obj.insert("datum".into(), to_json!(&a.datum));
    }
    if !a.levels.is_empty() {
        obj.insert("levels".into(), json!(a.levels));
    }
    if let Some(t) = a.horizon {
        obj.insert("horizon".into(), json!(t));
    }
    if a.x_min.is_some() || a.x_max.is_some() || a.dx.is_some() {
        let old: Option<GridSpec> = obj
            .get("grid")
            .and_then(|g| serde_json::from_value(g.clone()).ok());
        let pick = |flag: Option<f64>, old: Option<f64>, name: &str| {
            flag.or(old)
                .ok_or_else(|| Error::Config(format!("grid override needs --{name}")))
        };
        let g = GridSpec {
            x_min: pick(a.x_min, old.as_ref().map(|g| g.x_min), "x-min")?,
            x_max: pick(a.x_max, old.as_ref().map(|g| g.x_max), "x-max")?,
            dx: pick(a.dx, old.as_ref().map(|g| g.dx), "dx")?,
        };
        obj.insert("grid".into(), to_json!(&g));
    }
    if let Some(k) = a.snapshots {
        obj.insert(
            "snapshots".into(),
            to_json!(&SnapshotSpec::Uniform { uniform: k }),
        );
    }
    if let Some(c) = &a.checks {
        let list: Vec<&str> = c
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        obj.insert("checks".into(), json!(list));
    }
    if let Some(s) = a.seed {
        obj.insert("seed".into(), json!(s));
    }
    if let Some(c) = a.cfl {
        obj.insert("cfl".into(), json!(c));
    }
    if let Some(nf) = a.numerical_flux {
        let nf = match nf {
            SchemeArg::UpwindGodunov => NumericalFlux::UpwindGodunov,
            SchemeArg::EngquistOsher => NumericalFlux::EngquistOsher,
        };
        obj.insert("numerical_flux".into(), to_json!(&nf));
    }
    if let Some(o) = &a.out {
        obj.insert("output_dir".into(), json!(o.to_string_lossy()));
    }
    ExperimentConfig::from_json(&value.to_string())
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(
        cfg.output_dir
            .clone()
            .unwrap_or_else(|| "radonlaw-out".into()),
    )
}

fn write_trajectory(dir: &Path, run: &GridSolution) -> io::Result<PathBuf> {
    let n = run.level.unwrap_or(0);
    let path = dir.join(format!("trajectory_n{n}.csv"));
    let mut w = BufWriter::new(fs::File::create(&path)?);
    writeln!(w, "t,x,u")?;
    for s in &run.snapshots {
        for (i, u) in s.u.iter().enumerate() {
            writeln!(w, "{},{},{}", s.t, run.grid.center(i), u)?;
        }
    }
    w.flush()?;
    let mut d = BufWriter::new(fs::File::create(dir.join(format!("diagnostics_n{n}.csv")))?);
    writeln!(d, "t,mass,min,max")?;
    let diag = &run.diagnostics;
    for k in 0..diag.t.len() {
        writeln!(
            d,
            "{},{},{},{}",
            diag.t[k], diag.mass[k], diag.min[k], diag.max[k]
        )?;
    }
    d.flush()?;
    Ok(path)
}

fn simulate(a: &ExperimentArgs) -> CmdResult {
    let cfg = load_config(a)?;
    let set = recipes::config_runs(&cfg)?;
    let dir = output_dir(&cfg);
    fs::create_dir_all(&dir)?;
    let mut runs = Vec::new();
    for r in &set.runs {
        let path = write_trajectory(&dir, r)?;
        runs.push(json!({
            "level": r.level,
            "datum_id": r.datum_id,
            "trajectory": path.file_name().map(|f| f.to_string_lossy().into_owned()),
            "steps": r.steps,
            "cells": r.grid.n_cells,
            "dx": r.grid.dx,
            "initial_mass": r.diagnostics.mass.first(),
            "final_mass": r.diagnostics.mass.last(),
            "max_relative_mass_drift": r.diagnostics.max_relative_mass_drift(),
            "initial_max": r.initial_max,
        }));
    }
    let summary = json!({ "config": cfg, "runs": runs });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("summary.json"), &text)?;
    println!("{text}");
    Ok(())
}

fn emit_report(report: &serde_json::Value, path: Option<&Path>) -> io::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    if let Some(p) = path {
        fs::write(p, &text)?;
    }
    println!("{text}");
    Ok(())
}

fn summarize(checks: &[CheckReport]) {
    for c in checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        eprintln!("{tag} {} (margin {:.4e})", c.name, c.margin);
    }
}

fn verify(a: &VerifyArgs) -> CmdResult {
    let pass = match &a.recipe {
        Some(name) => {
            let names: Vec<&str> = if name == "all" {
                RECIPES.iter().map(|r| r.name).collect()
            } else {
                recipes::recipe(name)?;
                vec![name.as_str()]
            };
            let seed = a.experiment.seed.unwrap_or(0);
            let mut reports = Vec::new();
            for n in names {
                let r = recipes::run_recipe(n, seed)?;
                eprintln!("recipe {}: {}", r.recipe, r.claim);
                summarize(&r.checks);
                reports.push(r);
            }
            let pass = reports.iter().all(|r| r.pass);
            emit_report(
                &json!({ "pass": pass, "recipes": reports }),
                a.report.as_deref(),
            )?;
            pass
        }
        None => {
            let mut cfg = load_config(&a.experiment)?;
            if cfg.checks.is_empty() {
                cfg.checks = vec!["mass".into(), "max-principle".into(), "contraction".into()];
            }
            let set = recipes::config_runs(&cfg)?;
            let checks = recipes::config_checks(&cfg, &set)?;
            summarize(&checks);
            let pass = checks.iter().all(|c| c.pass);
            emit_report(
                &json!({ "pass": pass, "config": cfg, "checks": checks }),
                a.report.as_deref(),
            )?;
            pass
        }
    };
    if pass {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn parse_positions(text: &str) -> radonlaw::Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number '{s}' in positions")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let xs: Vec<f64> = match parts.as_slice() {
        [a, b, h] => {
            let (a, b, h) = (num(a)?, num(b)?, num(h)?);
            if !(h > 0.0) || b < a {
                return Err(Error::Config(format!(
                    "positions need start <= stop and step > 0, got '{text}'"
                )));
            }
            let count = ((b - a) / h + 1e-9).floor() as usize + 1;
            (0..count).map(|k| a + k as f64 * h).collect()
        }
        [_] => text.split(',').map(num).collect::<radonlaw::Result<_>>()?,
        _ => {
            return Err(Error::Config(format!(
                "positions must be start:stop:step or a list, got '{text}'"
            )))
        }
    };
    if xs.is_empty() {
        return Err(Error::Config("no positions".into()));
    }
    Ok(xs)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn emit_table(format: Format, header: &[&str], rows: &[Vec<Option<f64>>]) -> io::Result<()> {
    let mut out = BufWriter::new(io::stdout().lock());
    match format {
        Format::Csv => {
            writeln!(out, "{}", header.join(","))?;
            for r in rows {
                let cells: Vec<String> = r.iter().map(|v| fmt_opt(*v)).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        Format::Json => {
            let records: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    let m: serde_json::Map<String, serde_json::Value> = header
                        .iter()
                        .zip(r)
                        .map(|(h, v)| (h.to_string(), json!(v)))
                        .collect();
                    serde_json::Value::Object(m)
                })
                .collect();
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&records).expect("table serializes")
            )?;
        }
    }
    out.flush()
}

fn exact(a: &ExactArgs) -> CmdResult {
    let xs = parse_positions(&a.xs)?;
    let horizon = a.t.iter().copied().fold(0.0, f64::max);
    let sol = match a.n {
        Some(n) => ExactSolution::pulse(n, a.p, horizon)?,
        None => ExactSolution::measure(a.p, horizon)?,
    };
    let mut rows = Vec::new();
    for &t in &a.t {
        let atom = sol.atom_mass(t);
        let xi = sol.shock().filter(|c| t >= c.t_start).map(|c| c.xi(t)).transpose()?;
        for &x in &xs {
            let u = sol.regular(x, t)?;
            rows.push(vec![Some(t), Some(x), Some(u), Some(atom), xi]);
        }
    }
    emit_table(a.format, &["t", "x", "u_r", "atom_mass", "xi"], &rows)?;
    Ok(())
}

fn sweep(a: &SweepArgs) -> CmdResult {
    if a.p.is_empty() {
        return Err(Error::Config("sweep needs a nonempty --p list".into()).into());
    }
    let mut rows = Vec::new();
    match a.quantity {
        Quantity::T0 => {
            let g = Grid::new(-1.0, 1.0, 2)?;
            let u0 = RadonMeasure::dirac(g, 0.0, a.mass)?;
            for &p in &a.p {
                let flux = radonlaw::flux::Flux::power(p)?;
                let pair = flux.structural_constants().h2;
                let (lo, hi) = waiting_time_bounds(&flux, &u0, f64::INFINITY);
                let sharp = (hi - lo).abs() <= 1e-12 * hi.abs().max(1.0);
                rows.push(vec![
                    Some(p),
                    pair.map(|q| q.h),
                    pair.map(|q| q.k),
                    Some(lo),
                    hi.is_finite().then_some(hi),
                    sharp.then_some(lo),
                ]);
            }
            emit_table(a.format, &["p", "H", "K", "lower", "upper", "t0"], &rows)?;
        }
        Quantity::SingularMass => {
            if a.times.is_empty() {
                return Err(Error::Config("sweep needs a nonempty --times list".into()).into());
            }
            let horizon = a.times.iter().copied().fold(0.0, f64::max).max(1e-12);
            for &p in &a.p {
                let sol = ExactSolution::measure(p, horizon)?;
                for &t in &a.times {
                    rows.push(vec![Some(p), Some(t), Some(a.mass * sol.atom_mass(t))]);
                }
            }
            emit_table(a.format, &["p", "t", "singular_mass"], &rows)?;
        }
    }
    Ok(())
}

fn list_recipes() -> CmdResult {
    for r in RECIPES {
        println!("{:<30} {}", r.name, r.claim);
    }
    Ok(())
}
