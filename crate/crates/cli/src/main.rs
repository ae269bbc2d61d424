#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod failure;
mod io;
mod map;
mod pipeline;
mod stages;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Space-time kriging of mobile sensor measurements.
#[derive(Debug, Parser)]
#[command(name = "stkrige", version, about)]
struct Cli {
    /// log progress at info level (RUST_LOG overrides)
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a raw mobile CSV into normalized observations
    Ingest(commands::IngestArgs),
    /// Fit per-sensor calibrations against a reference series
    Calibrate(commands::CalibrateArgs),
    /// Compute a binned empirical space-time variogram
    Variogram(commands::VariogramArgs),
    /// Fit a metric variogram model to an empirical variogram
    Fit(commands::FitArgs),
    /// Draw a Gaussian field at given points
    Simulate(commands::SimulateArgs),
    /// Predict at target points
    Predict(commands::PredictArgs),
    /// Predict on a space-time raster
    Map(map::MapArgs),
    /// Compare methods by cross-validation
    Crossval(commands::CrossvalArgs),
    /// Run ingest through cross-validation from a config file
    Pipeline(pipeline::PipelineArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Variogram(a) => commands::variogram(a),
        Command::Fit(a) => commands::fit(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Predict(a) => commands::predict(a),
        Command::Map(a) => map::map(a),
        Command::Crossval(a) => commands::crossval(a),
        Command::Pipeline(a) => pipeline::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit_code())
        }
    }
}
