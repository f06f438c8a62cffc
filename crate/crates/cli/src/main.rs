//! `rdim`: Riemannian Dimension analysis of fully connected ReLU networks.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 input error, 3 numeric error.

mod args;
mod commands;
mod data;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, GeometryCommand};

/// What went wrong, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum Failure {
    Verification(String),
    Input(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Input(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<rdim::Error> for Failure {
    fn from(e: rdim::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("RD_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Input(format!("RD_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Input(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::TrainDemo(a) => commands::train_demo(&a),
        Command::Geometry {
            command: GeometryCommand::Verify(a),
        } => commands::geometry_verify(&a),
        Command::IsoCheck(a) => commands::iso_check(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.verbosity())
        .parse_env("RUST_LOG")
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
