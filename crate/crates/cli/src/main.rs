//! `qnglab` command-line front end.

mod certify;
mod config;
mod depth;
mod output;
mod sweep;
mod threshold;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Scenario;

#[derive(Debug, Parser)]
#[command(name = "qnglab", version, about = "Click-statistics thresholds, verdicts and sweeps")]
struct Cli {
    /// JSON scenario file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with status 1 when a verdict fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a threshold table.
    Threshold(threshold::Args),
    /// Certify measured clicks against a threshold table.
    Certify(certify::Args),
    /// Sweep one source-model parameter and tabulate a criterion.
    Sweep(sweep::Args),
    /// Thermal depths of Fock states under several criteria.
    PhononDepth(depth::Args),
    /// Monte-Carlo check that sampled free states stay below a table.
    Verify(verify::Args),
}

pub enum Outcome {
    Done,
    VerdictFailed,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let scenario = Scenario::load(cli.config.as_deref())?;
    match cli.command {
        Command::Threshold(a) => threshold::run(scenario.section("threshold", &a)?),
        Command::Certify(a) => certify::run(scenario.section("certify", &a)?),
        Command::Sweep(a) => sweep::run(scenario.section("sweep", &a)?),
        Command::PhononDepth(a) => depth::run(scenario.section("phonon-depth", &a)?),
        Command::Verify(a) => verify::run(scenario.section("verify", &a)?),
    }
}

/// 2 for bad input, 3 for numerical failures inside the library.
fn exit_code(e: &anyhow::Error) -> u8 {
    use qnglab::Error::*;
    for cause in e.chain() {
        if let Some(q) = cause.downcast_ref::<qnglab::Error>() {
            return match q {
                InvalidParameter(_) | InvalidMode { .. } | IncompatibleScheme(_) | InsufficientCounts(_) | OutOfDomain { .. } => 2,
                _ => 3,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let strict = cli.strict;
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::VerdictFailed) => ExitCode::from(if strict { 1 } else { 0 }),
        Err(e) => {
            eprintln!("qnglab: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
