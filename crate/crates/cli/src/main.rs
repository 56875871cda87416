//! `kis`: kernel SVM training with preconditioned interior point iterations.
//!
//! Exit codes: 0 success, 1 internal error, 2 input error, 3 solver stall,
//! 4 configuration error.

mod args;
mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kis_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "kis",
    version,
    about = "Kernel SVM training with preconditioned interior point iterations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write it with its metrics.
    Train(commands::TrainArgs),
    /// Predict labels with a saved model.
    Predict(commands::PredictArgs),
    /// Random search over length-scales and C.
    Tune(commands::TuneArgs),
    /// Compare preconditioners across ranks and subset sizes.
    Benchmark(commands::BenchmarkArgs),
    /// Write a synthetic dataset.
    GenSynthetic(commands::GenArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Parse { .. } | Error::Cell { .. } | Error::Data(_) => 2,
        Error::Stalled { .. } | Error::AllTrialsStalled { .. } => 3,
        Error::Config(_)
        | Error::DimensionMismatch { .. }
        | Error::Model(_)
        | Error::WindowTooLarge { .. }
        | Error::TooLarge { .. } => 4,
        _ => 1,
    }
}

fn configure_threads() {
    let Ok(value) = std::env::var("KIS_THREADS") else {
        return;
    };
    match value.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("could not set {n} threads: {e}");
            }
        }
        _ => log::warn!("ignoring KIS_THREADS={value}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Tune(a) => commands::tune(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::GenSynthetic(a) => commands::gen_synthetic(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
