//! `bem-local`: convergence studies for the 2D Laplace boundary element
//! discretizations.
//!
//! Exit codes: 0 success, 1 convergence/acceptance check failed,
//! 2 invalid configuration or input, 3 runtime failure.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bem2d::harness::{
    emit_csv, emit_plot_data, parse_alpha, predicted_rates, run_experiment, summarize, Equation,
    ExperimentConfig, GeometrySpec,
};
use bem2d::{acceptance, Error};

#[derive(Parser)]
#[command(name = "bem-local", version, about = "Local convergence studies for 2D Laplace BEM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a refinement study and report fitted vs predicted rates.
    Run(RunArgs),
    /// Print the duality exponent and predicted rates for a configuration.
    Predict(PredictArgs),
    /// Run the full acceptance checklist.
    Verify(VerifyArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// lshape | zshape | square | file:PATH
    #[arg(long)]
    geometry: Option<String>,
    /// symm | hypsing
    #[arg(long)]
    equation: Option<String>,
    /// Solution exponent, e.g. 1/3 or 0.125
    #[arg(long)]
    alpha: Option<String>,
    /// Number of uniform refinement levels (records)
    #[arg(long)]
    levels: Option<usize>,
    /// Initial segments per polygon edge
    #[arg(long = "segments-per-edge")]
    segments_per_edge: Option<usize>,
    /// Local region keeps elements at least this fraction of the diameter
    /// away from the singular corner
    #[arg(long = "region-dist")]
    region_dist: Option<f64>,
    /// Number of finest levels used in the EOC fit
    #[arg(long = "eoc-window")]
    eoc_window: Option<usize>,
    /// |EOC - predicted| tolerance override
    #[arg(long)]
    tolerance: Option<f64>,
    /// Write the convergence table as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write whitespace-separated log-log plot data
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Worker threads (defaults to all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// key=value file supplying defaults for the flags above
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// lshape | zshape | square | file:PATH
    #[arg(long)]
    geometry: String,
    /// Solution exponent, e.g. 1/3 or 0.125
    #[arg(long)]
    alpha: String,
    /// symm | hypsing
    #[arg(long, default_value = "symm")]
    equation: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// Worker threads (defaults to all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_)
                | Error::InvalidPolygon(_)
                | Error::UnknownGeometry(_)
                | Error::DiameterTooLarge(_)
                | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Predict(args) => predict(args),
        Command::Verify(args) => verify(args),
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::InvalidConfig("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Reads `key = value` lines ('#' comments allowed) into a map.
fn read_config_file(path: &PathBuf) -> Result<BTreeMap<String, String>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{}:{}: expected key=value, got '{line}'",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parsed<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, Error>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| Error::InvalidConfig(format!("config key '{key}': {e}"))),
    }
}

fn run(mut args: RunArgs) -> Result<ExitCode, Error> {
    // Flags override config-file values.
    if let Some(path) = &args.config {
        let file = read_config_file(path)?;
        for key in file.keys() {
            const KNOWN: &[&str] = &[
                "geometry", "equation", "alpha", "levels", "segments-per-edge",
                "region-dist", "eoc-window", "tolerance", "csv", "plot", "threads",
            ];
            if !KNOWN.contains(&key.as_str()) {
                return Err(Error::InvalidConfig(format!("unknown config key '{key}'")));
            }
        }
        args.geometry = args.geometry.or_else(|| file.get("geometry").cloned());
        args.equation = args.equation.or_else(|| file.get("equation").cloned());
        args.alpha = args.alpha.or_else(|| file.get("alpha").cloned());
        args.levels = args.levels.or(parsed(&file, "levels")?);
        args.segments_per_edge = args.segments_per_edge.or(parsed(&file, "segments-per-edge")?);
        args.region_dist = args.region_dist.or(parsed(&file, "region-dist")?);
        args.eoc_window = args.eoc_window.or(parsed(&file, "eoc-window")?);
        args.tolerance = args.tolerance.or(parsed(&file, "tolerance")?);
        args.threads = args.threads.or(parsed(&file, "threads")?);
        args.csv = args.csv.or_else(|| file.get("csv").map(PathBuf::from));
        args.plot = args.plot.or_else(|| file.get("plot").map(PathBuf::from));
    }
    set_threads(args.threads)?;

    let geometry = GeometrySpec::parse(
        args.geometry
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("missing --geometry".into()))?,
    )?;
    let equation: Equation = args
        .equation
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("missing --equation".into()))?
        .parse()?;
    let alpha = parse_alpha(
        args.alpha
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("missing --alpha".into()))?,
    )?;

    let mut cfg = ExperimentConfig::new(geometry, equation, alpha);
    if let Some(v) = args.levels {
        cfg.levels = v;
    }
    if let Some(v) = args.segments_per_edge {
        cfg.segments_per_edge = v;
    }
    if let Some(v) = args.region_dist {
        cfg.region_dist = v;
    }
    if let Some(v) = args.eoc_window {
        cfg.eoc_window = v;
    }
    cfg.rate_tolerance = args.tolerance;

    let table = run_experiment(&cfg)?;
    for rec in &table.records {
        let norms: Vec<String> = rec
            .norms
            .iter()
            .map(|(k, v)| format!("{k}={v:.6e}"))
            .collect();
        println!("level {:2}  N {:6}  {}", rec.level, rec.n, norms.join("  "));
    }
    println!("{}", summarize(&table));
    if let Some(path) = &args.csv {
        emit_csv(&table, path)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &args.plot {
        emit_plot_data(&table, path)?;
        println!("wrote {}", path.display());
    }
    Ok(if table.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn predict(args: PredictArgs) -> Result<ExitCode, Error> {
    let polygon = GeometrySpec::parse(&args.geometry)?.resolve()?;
    let alpha = parse_alpha(&args.alpha)?;
    let equation: Equation = args.equation.parse()?;
    let rates = predicted_rates(&polygon, alpha, equation)?;
    println!("geometry:        {}", polygon.name().unwrap_or("polygon"));
    println!("alpha:           {alpha:.12}");
    println!("alpha_D bound:   {:.12}", polygon.alpha_d_bound()?);
    println!("rate (energy):   {:.12}", rates.global_energy);
    println!("rate (local):    {:.12}", rates.local);
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    set_threads(args.threads)?;
    let results = acceptance::run_all();
    let mut all_ok = true;
    for r in &results {
        let mark = if r.passed { "pass" } else { "FAIL" };
        println!("[{mark}] {} — {}", r.name, r.detail);
        all_ok &= r.passed;
    }
    println!(
        "{}/{} criteria passed",
        results.iter().filter(|r| r.passed).count(),
        results.len()
    );
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
