mod cmd;
mod config;
mod error;
mod output;
mod table;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{Map, Value};

use crate::error::{input, runtime, CliError, Result};
use crate::output::{Ctx, Outputs};

/// Labor-market analytics from digital traces: behavioral indicators,
/// network spreading, complexity indices, kriging, regression and matching.
#[derive(Parser)]
#[command(name = "laborflow", version)]
struct Cli {
    /// JSON config with optional `seed`, `threads`, `out` and one object per
    /// subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Base seed for every random stage [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: .].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-user indicators from an event log, optionally standardized by district.
    Indicators(cmd::indicators::Args),
    /// Voronoi coverage, areal interpolation and penetration rates.
    Geo(cmd::geo::Args),
    /// Train a self-organizing map.
    Som(cmd::learn::SomArgs),
    /// Kriging fit and prediction.
    Gp(cmd::learn::GpArgs),
    /// OLS or logit regression.
    Regress(cmd::learn::RegressArgs),
    /// Classify nominations into reciprocal and unilateral ties.
    Ties(cmd::network::TiesArgs),
    /// Directional spreading trials.
    Diffuse(cmd::network::DiffuseArgs),
    /// Edge-percolation experiment by tie class.
    Percolate(cmd::network::PercolateArgs),
    /// Complexity indices by reflections and/or eigenvector.
    Complexity(cmd::complexity::ComplexityArgs),
    /// Activity proximity matrix.
    Proximity(cmd::complexity::ProximityArgs),
    /// Coarsened exact matching and treatment-effect contrasts.
    Match(cmd::matching::Args),
    /// K-fold cross-validation.
    Cv(cmd::learn::CvArgs),
    /// Simulated outcomes and first differences from a fitted model.
    Simulate(cmd::learn::SimulateArgs),
    /// Synthetic inputs.
    Synth(cmd::synth::Args),
}

const SECTIONS: [&str; 14] = [
    "indicators",
    "geo",
    "som",
    "gp",
    "regress",
    "ties",
    "diffuse",
    "percolate",
    "complexity",
    "proximity",
    "match",
    "cv",
    "simulate",
    "synth",
];

fn dispatch(command: &Command, cfg: Option<&Map<String, Value>>, ctx: &mut Ctx) -> Result<(&'static str, Value, Outputs)> {
    macro_rules! go {
        ($name:literal, $args:expr, $run:path) => {{
            let args = config::resolve($args, cfg, $name)?;
            let params = serde_json::to_value(&args).map_err(|e| runtime(e.to_string()))?;
            let out = $run(&args, ctx)?;
            Ok(($name, params, out))
        }};
    }
    match command {
        Command::Indicators(a) => go!("indicators", a, cmd::indicators::run),
        Command::Geo(a) => go!("geo", a, cmd::geo::run),
        Command::Som(a) => go!("som", a, cmd::learn::som),
        Command::Gp(a) => go!("gp", a, cmd::learn::gp),
        Command::Regress(a) => go!("regress", a, cmd::learn::regress),
        Command::Ties(a) => go!("ties", a, cmd::network::ties),
        Command::Diffuse(a) => go!("diffuse", a, cmd::network::diffuse),
        Command::Percolate(a) => go!("percolate", a, cmd::network::percolate),
        Command::Complexity(a) => go!("complexity", a, cmd::complexity::complexity),
        Command::Proximity(a) => go!("proximity", a, cmd::complexity::proximity),
        Command::Match(a) => go!("match", a, cmd::matching::run),
        Command::Cv(a) => go!("cv", a, cmd::learn::cv),
        Command::Simulate(a) => go!("simulate", a, cmd::learn::simulate),
        Command::Synth(a) => go!("synth", a, cmd::synth::run),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| input(format!("cannot read {}: {e}", p.display())))?;
            Some(config::parse(&text, &SECTIONS)?)
        }
        None => None,
    };
    let seed = match cli.seed {
        Some(s) => s,
        None => config::global(cfg.as_ref(), "seed")?.unwrap_or(0),
    };
    let threads: Option<usize> = match cli.threads {
        Some(t) => Some(t),
        None => config::global(cfg.as_ref(), "threads")?,
    };
    let out: PathBuf = match cli.out {
        Some(o) => o,
        None => config::global(cfg.as_ref(), "out")?.unwrap_or_else(|| PathBuf::from(".")),
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| runtime(e.to_string()))?;
    }
    let mut ctx = Ctx::new(seed);
    let (name, params, outputs) = dispatch(&cli.command, cfg.as_ref(), &mut ctx)?;
    let manifest = output::commit(&out, name, params, ctx, outputs)?;
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| runtime(e.to_string()))?;
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CliError::code(&e) as u8)
        }
    }
}
