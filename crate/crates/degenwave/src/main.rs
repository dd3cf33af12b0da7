//! Command-line entry point: `degenwave run <config> [--out DIR]` and
//! `degenwave validate <config>`.

use clap::{Parser, Subcommand};
use degenwave::config::load_config;
use degenwave::experiment;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "degenwave", version, about = "Degenerate wave equation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        config: PathBuf,
        /// Override the output directory from the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a configuration file and report all violations.
    Validate { config: PathBuf },
}

#[derive(Serialize)]
struct ErrorReport {
    error: String,
    kind: &'static str,
}

fn error_kind(e: &degenwave::Error) -> &'static str {
    use degenwave::Error::*;
    match e {
        OutsideDomain { .. } | InvalidDomain(_) => "domain",
        InvalidWeight(_) | InvalidExponent { .. } | ClassificationFailure(_) => "weight",
        InvalidMesh(_) | LengthMismatch { .. } => "mesh",
        Stability { .. } | LinearSolve { .. } | Eigen(_) => "solver",
        UndefinedRatio | Precondition(_) => "precondition",
        HumNonConvergence { .. } => "hum-nonconvergence",
        Config(_) => "config",
        Io(_) => "io",
        Json(_) => "json",
    }
}

fn fail(e: degenwave::Error) -> ExitCode {
    let report = ErrorReport { error: e.to_string(), kind: error_kind(&e) };
    eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match experiment::run(&cfg, out.as_deref()) {
                Ok(summary) => {
                    println!(
                        "wrote {} files to {}",
                        summary.files.len(),
                        summary.out_dir.display()
                    );
                    for f in &summary.files {
                        println!("  {f}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                println!("valid: {:?} experiment, n = {}", cfg.experiment, cfg.mesh_n);
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
