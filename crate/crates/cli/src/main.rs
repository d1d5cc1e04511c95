//! `regulus`: exploration, tail estimates, bounds, oracles and audits for
//! critical bond percolation on random regular graphs.

mod common;
mod experiments;
mod oracle_cmd;
mod theory_cmd;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regulus_core::mc_harness::with_threads;
use regulus_core::Error;

use common::Global;

const EXIT_USAGE: u8 = 64;
const EXIT_INFEASIBLE: u8 = 65;

#[derive(Parser, Debug)]
#[command(
    name = "regulus",
    version,
    about = "Critical percolation on random regular graphs"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one exploration and report its component sizes.
    Simulate(experiments::Simulate),
    /// Estimate P(|C| > threshold) for a uniform vertex or the largest component.
    Tail(experiments::Tail),
    /// Evaluate a closed-form quantity or bound.
    Theory {
        #[command(subcommand)]
        op: theory_cmd::TheoryOp,
    },
    /// Exact small-scale computations.
    Oracle {
        #[command(subcommand)]
        op: oracle_cmd::OracleOp,
    },
    /// Pathwise identity suites and concentration audits.
    Verify {
        #[command(subcommand)]
        op: experiments::VerifyOp,
    },
    /// Tail estimates along an A grid with the log-linear fit.
    Scaling(experiments::Scaling),
}

fn dispatch(cli: &Cli) -> anyhow::Result<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate(a) => experiments::simulate(a, g),
        Command::Tail(a) => experiments::tail(a, g),
        Command::Theory { op } => theory_cmd::run(op, g),
        Command::Oracle { op } => oracle_cmd::run(op, g),
        Command::Verify { op } => experiments::verify(op, g),
        Command::Scaling(a) => experiments::scaling(a, g),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidParams(_) | Error::Parse(_)) => EXIT_USAGE,
        Some(
            Error::Infeasible(_) | Error::Hypothesis(_) | Error::Horizon { .. } | Error::SizeCap(_),
        ) => EXIT_INFEASIBLE,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = with_threads(cli.global.threads, || {
        dispatch(&cli).map_err(|e| (exit_code(&e), format!("{e:#}")))
    });
    match outcome {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err((code, msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
