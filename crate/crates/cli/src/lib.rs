//! `fpt`: transforms, densities and Monte Carlo validation from a JSON run
//! configuration.
//!
//! Exit codes: 0 on success, 1 on any configuration, input or output error,
//! 2 when `validate` finds a disagreement.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::{Format, Quantity, RunConfig};
pub use error::CliError;
use output::Destination;

#[derive(Debug, Parser)]
#[command(name = "fpt", version, about = "First-passage transforms, densities and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Joint, jump-time and exit transforms over the query grid.
    Transform(Common),
    /// Transition densities over the (t, x, y) grid.
    Density(Common),
    /// Analytic values against Monte Carlo, with standard errors.
    Validate(Common),
    /// Hitting-time summaries per start.
    Simulate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry, e.g. `--set sim.n_paths=1000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Main output file; extra tables and `<stem>.meta.json` go next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Base seed; overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

/// Worker count from `FPT_THREADS`, if set.
fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("FPT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Threads(v)),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(v)) => Err(CliError::Threads(v.to_string_lossy().into_owned())),
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.render().to_string();
            let text = text.trim_start_matches("error: ").trim_end().to_string();
            eprintln!("fpt: {}", CliError::Usage(text));
            return 1;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fpt: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (name, common) = match &cli.command {
        Command::Transform(c) => ("transform", c),
        Command::Density(c) => ("density", c),
        Command::Validate(c) => ("validate", c),
        Command::Simulate(c) => ("simulate", c),
    };
    if let Some(n) = thread_cap()? {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = RunConfig::load(&common.config, &common.set)?;
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    if let Some(f) = common.format {
        cfg.output.format = f;
    }
    if let Some(out) = &common.out {
        cfg.output.path = Some(out.clone());
    }
    let path = cfg.output.path.clone().ok_or_else(|| CliError::Usage("no output path: pass --out".into()))?;
    let dest = Destination::open(path, cfg.output.format)?;

    let start = Instant::now();
    let outcome = match cli.command {
        Command::Transform(_) => commands::transform(&cfg),
        Command::Density(_) => commands::density(&cfg),
        Command::Validate(_) => commands::validate(&cfg),
        Command::Simulate(_) => commands::simulate(&cfg),
    }?;
    let elapsed = start.elapsed().as_secs_f64();

    let ext = dest.format.extension();
    let mut written = Vec::new();
    for (tag, table) in &outcome.tables {
        let path = if *tag == "main" { dest.path.clone() } else { dest.sibling(tag, ext) };
        dest.write_table(&path, table)?;
        written.push(path.display().to_string());
    }
    let status = if outcome.failure.is_some() { "validation-failed" } else { "ok" };
    let meta = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "status": status,
        "seed": cfg.sim.seed,
        "streams": outcome.streams,
        "threads": rayon::current_num_threads(),
        "elapsed_seconds": elapsed,
        "outputs": written,
        "summary": outcome.summary,
        "config": cfg,
    });
    dest.write_json(&dest.meta_path(), &meta)?;

    if name == "validate" {
        report(&outcome.summary);
    }
    match outcome.failure {
        Some(msg) => Err(CliError::Validation(msg)),
        None => Ok(()),
    }
}

/// Per-variant z-scores on stdout; no variant is chosen here.
fn report(summary: &serde_json::Value) {
    let z = summary["z_max"].as_f64().unwrap_or(3.0);
    for system in summary["adjudication"].as_array().into_iter().flatten() {
        for v in system["variants"].as_array().into_iter().flatten() {
            println!(
                "{:<9} {:<32} {:>3}/{:<3} cells within {z} SE, max |z| {:.2}",
                system["system"].as_str().unwrap_or(""),
                v["variant"].as_str().unwrap_or(""),
                v["passed"],
                v["cells"],
                v["max_abs_z"].as_f64().unwrap_or(f64::NAN),
            );
        }
    }
    let other = &summary["other_checks"];
    if other["cells"].as_u64().unwrap_or(0) > 0 {
        println!(
            "other checks: {}/{} within {z} SE, max |z| {:.2}",
            other["passed"],
            other["cells"],
            other["max_abs_z"].as_f64().unwrap_or(f64::NAN)
        );
    }
    for s in summary["density"]["systems"].as_array().into_iter().flatten() {
        println!(
            "{} density: {} bins, max |z| {:.2}",
            s["system"].as_str().unwrap_or(""),
            s["bins"],
            s["max_abs_z"].as_f64().unwrap_or(f64::NAN)
        );
    }
}
