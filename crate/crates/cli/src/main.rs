//! `skewshadow`: batch experiments for hyperbolic toral automorphisms forced by
//! an irrational rotation.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 mathematical
//! precondition failure, 3 budget exhaustion.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "skewshadow",
    version,
    about = "Shadowing, periodic graphs and horseshoes for forced toral automorphisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment configuration.
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigen-splitting and shadowing constants.
    Splitting(Common),
    /// Random periodic graph near a constant graph.
    Periodic(Common),
    /// Separated family, symbolic embedding and its certificates.
    Horseshoe(Common),
    /// Weak horseshoe with bounded hitting times.
    WeakHorseshoe(Common),
    /// Entropy slopes from Bowen-ball statistics.
    Entropy(Common),
    /// Weyl sums along one orbit.
    Ergodicity(Common),
    /// Mixing time between two fiber balls.
    Mixing(Common),
    /// Degree obstruction to continuous invariant graphs.
    Obstruction(Common),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Lib(skewshadow::Error),
    Located(String, skewshadow::Error),
}

impl From<skewshadow::Error> for CliError {
    fn from(e: skewshadow::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        let lib = |e: &skewshadow::Error| {
            if e.is_budget() {
                3
            } else if e.is_precondition() {
                2
            } else {
                1
            }
        };
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Lib(e) | CliError::Located(_, e) => lib(e),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Located(at, e) => write!(f, "{at}: {e}"),
        }
    }
}

type Runner = fn(&config::Loaded) -> Result<output::Outcome, CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common, cmd): (&str, &Common, Runner) = match &cli.command {
        Command::Splitting(c) => ("splitting", c, commands::splitting),
        Command::Periodic(c) => ("periodic", c, commands::periodic),
        Command::Horseshoe(c) => ("horseshoe", c, commands::horseshoe),
        Command::WeakHorseshoe(c) => ("weak-horseshoe", c, commands::weak_horseshoe),
        Command::Entropy(c) => ("entropy", c, commands::entropy),
        Command::Ergodicity(c) => ("ergodicity", c, commands::ergodicity),
        Command::Mixing(c) => ("mixing", c, commands::mixing),
        Command::Obstruction(c) => ("obstruction", c, commands::obstruction),
    };
    let loaded = config::load(&common.config)?;
    let outcome = cmd(&loaded)?;
    let mut text = String::new();
    for line in &outcome.summary {
        text.push_str(line);
        text.push('\n');
    }
    for c in &outcome.certificates {
        let mark = if c.holds { "ok" } else { "FAILED" };
        let (v, l) = (output::fmt_f64(c.value), output::fmt_f64(c.limit));
        text.push_str(&format!("[{mark}] {}: {v} {} {l}\n", c.name, c.relation));
    }
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    let out = &loaded.config.output;
    let dir = common.out.clone().unwrap_or_else(|| out.directory.clone());
    let written = output::write_outputs(&dir, name, &loaded.hash, &outcome, out.wants("json"), out.wants("csv"))?;
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
