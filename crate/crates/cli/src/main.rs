//! `meanslab`: compute operator means, evaluate constants, run verification suites.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 solver non-convergence,
//! 3 verification failures.

mod compute;
mod constant;
mod fmt;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "meanslab", version, about = "Operator means on positive-definite matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a mean described by a JSON job (file or `-` for stdin).
    Compute(compute::Args),
    /// Print a constant: kantorovich H P | specht H | beta M_LO M_HI ALPHA | gamma M_LO M_HI R ALPHA.
    Const(constant::Args),
    /// Run randomized inequality checks and report margins.
    Verify(verify::Args),
}

pub enum Failure {
    /// Bad flags, schema violations, domain errors, I/O errors.
    Invalid(String),
    NonConvergence(String),
    ChecksFailed(usize),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::NonConvergence(_) => 2,
            Failure::ChecksFailed(_) => 3,
        }
    }
}

impl From<meanslab_core::MeansError> for Failure {
    fn from(e: meanslab_core::MeansError) -> Self {
        match e {
            meanslab_core::MeansError::NonConvergence { .. } => Failure::NonConvergence(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Compute(args) => compute::run(args),
        Command::Const(args) => constant::run(args),
        Command::Verify(args) => verify::run(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(msg) => eprintln!("error: {msg}"),
                Failure::NonConvergence(msg) => eprintln!("error: {msg}"),
                Failure::ChecksFailed(n) => eprintln!("{n} check report(s) failed"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
