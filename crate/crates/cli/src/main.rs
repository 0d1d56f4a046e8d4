//! `gwtail`: batch access to exact tails, Monte Carlo estimates, bounds,
//! exploration trees, MGF asymptotics and the adversarial search.

mod commands;
mod config;
mod output;
mod plot;
mod selftest;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use config::{parse_seed, read_config, Format, Params, PlotKind, RunConfig, DEFAULT_SEED};

const EXIT_VALIDATION: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "gwtail", version, about = "Right tails of supercritical bounded Galton-Watson martingales")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with parameters; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (decimal or 0x-hex)
    #[arg(long, global = true, env = "GWTAIL_SEED", value_parser = parse_seed)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it
    #[arg(long, global = true, env = "GWTAIL_WORKERS")]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write here instead of stdout
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Run this subcommand's built-in checks and exit
    #[arg(long, global = true)]
    selftest: bool,
    /// Emit long-format plot data instead of the table
    #[arg(long, global = true, value_enum)]
    plot: Option<PlotKind>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact law of Z_n and tails of W_n
    Exact(Params),
    /// Plain Monte Carlo tails of W_n, or of max_{l <= horizon} W_l with --horizon
    Mc(Params),
    /// Importance-sampled tails of W_n
    Tilt(Params),
    /// The universal tail bound, or its derivation check with --chain
    Bound(Params),
    /// Exploration trees: run summaries, --survival, --verify or --domination
    Explore(Params),
    /// Moment generating function of W and Chernoff bounds
    Mgf(Params),
    /// Tail exponent fit against gamma/(gamma - 1)
    Fit(Params),
    /// Best-found law maximizing P(W_n >= x) at fixed (m, d)
    Search(Params),
    /// Search over grids of (m, d, x)
    Sweep(Params),
    /// Derivation check of the bound's constants
    Chain(Params),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmd {
    Exact,
    Mc,
    Tilt,
    Bound,
    Explore,
    Mgf,
    Fit,
    Search,
    Sweep,
    Chain,
}

impl Cmd {
    pub fn name(self) -> &'static str {
        match self {
            Cmd::Exact => "exact",
            Cmd::Mc => "mc",
            Cmd::Tilt => "tilt",
            Cmd::Bound => "bound",
            Cmd::Explore => "explore",
            Cmd::Mgf => "mgf",
            Cmd::Fit => "fit",
            Cmd::Search => "search",
            Cmd::Sweep => "sweep",
            Cmd::Chain => "chain",
        }
    }
}

impl Command {
    fn split(self) -> (Cmd, Params) {
        match self {
            Command::Exact(p) => (Cmd::Exact, p),
            Command::Mc(p) => (Cmd::Mc, p),
            Command::Tilt(p) => (Cmd::Tilt, p),
            Command::Bound(p) => (Cmd::Bound, p),
            Command::Explore(p) => (Cmd::Explore, p),
            Command::Mgf(p) => (Cmd::Mgf, p),
            Command::Fit(p) => (Cmd::Fit, p),
            Command::Search(p) => (Cmd::Search, p),
            Command::Sweep(p) => (Cmd::Sweep, p),
            Command::Chain(p) => (Cmd::Chain, p),
        }
    }
}

struct InvariantViolation(String);

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<gwtail::Error>() {
        Some(gwtail::Error::BudgetExceeded(_) | gwtail::Error::Overflow) => EXIT_BUDGET,
        _ => EXIT_VALIDATION,
    }
}

fn run(cli: Cli) -> Result<Option<InvariantViolation>> {
    let (cmd, flags) = cli.command.split();
    if cli.selftest {
        return Ok((!selftest::run(cmd)).then(|| InvariantViolation(format!("{} selftest failed", cmd.name()))));
    }
    let (settings, file_params) = match &cli.config {
        Some(path) => read_config(path)?,
        None => Default::default(),
    };
    if let Some(name) = &settings.subcommand {
        if name != cmd.name() {
            bail!("config file is for subcommand {name:?}, not {:?}", cmd.name());
        }
    }
    let params = commands::with_defaults(cmd, flags.over(&file_params)?);
    let config = RunConfig {
        subcommand: cmd.name(),
        seed: cli.seed.or(settings.seed).unwrap_or(DEFAULT_SEED),
        format: cli.format.or(settings.format).unwrap_or(Format::Csv),
        plot: cli.plot.or(settings.plot),
        params,
    };
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build_global()?;
    }
    let outcome = commands::run(cmd, &config.params, config.seed, config.plot)?;
    let text = output::render(&config, &outcome.table, config.format)?;
    match &cli.output {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                // a closed pipe (e.g. `| head`) is not an error
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(outcome.violation.map(InvariantViolation))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(InvariantViolation(msg))) => {
            eprintln!("gwtail: invariant violation: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(err) => {
            eprintln!("gwtail: error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
