//! `gllab`: surface tables, conformal charts, renormalized energy reports,
//! heat-flow runs and the verification suites.
//!
//! Exit codes: 0 success, 2 invalid input, 3 timeout, 4 numerical failure
//! (including failed verification), 1 for I/O errors on outputs.

mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gllab_core::Error;
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "gllab", version, about = "Ginzburg-Landau vortices on surfaces of revolution")]
struct Cli {
    /// JSON run configuration; defaults apply to every omitted key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the flow and initial data.
    #[arg(long, global = true, env = "GLLAB_THREADS")]
    threads: Option<usize>,
    /// Also evaluate W from its limit definition (renorm).
    #[arg(long, global = true)]
    oracle: bool,
    /// Seed for randomized configurations and verification points.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate s, alpha, alpha', beta and K to surface.csv.
    Surface,
    /// Solve the conformal chart of a closed surface and write chart.csv.
    Chart,
    /// Renormalized energy, Hessian spectrum and instability certificate.
    Renorm,
    /// Integrate the heat flow on a boundary cap.
    Flow,
    /// Run a verification suite and print a JSON verdict.
    Verify {
        #[arg(value_enum)]
        suite: verify::Suite,
    },
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Numerical(String),
    /// The flow hit `t_max`; carries the run report.
    Timeout(Value),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SlopeExceedsOne { .. }
            | Error::NegativeRadius { .. }
            | Error::PoleMismatch { .. }
            | Error::BadParameter(_)
            | Error::WrongSurfaceKind(_)
            | Error::ConfigurationInvalid(_)
            | Error::AtVortexCenter { .. }
            | Error::VortexTooCloseToBoundary { .. }
            | Error::DegreesDoNotCancel(_)
            | Error::Format(_)
            | Error::PoleAtInfinity
            | Error::OriginUndefined { .. } => Failure::Input(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Input(_) => 2,
            Failure::Timeout(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

fn execute(cli: Cli) -> Result<Value, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Io(e.to_string()))?;
    }
    let mut config = config::load(cli.config.as_deref())?;
    if let Some(out) = cli.out.clone() {
        config.output.dir = out;
    }
    let mut ctx = commands::Context { config, oracle: cli.oracle, seed: cli.seed };
    match cli.command {
        Command::Surface => commands::surface(&mut ctx),
        Command::Chart => commands::chart(&mut ctx),
        Command::Renorm => commands::renorm(&mut ctx),
        Command::Flow => commands::flow(&mut ctx),
        Command::Verify { suite } => {
            let verdict = verify::verify(suite, cli.seed)?;
            let value = serde_json::to_value(&verdict).map_err(|e| Failure::Io(e.to_string()))?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Io(e.to_string()))?;
                let text = serde_json::to_string_pretty(&value).map_err(|e| Failure::Io(e.to_string()))?;
                std::fs::write(dir.join("verify.json"), text + "\n").map_err(|e| Failure::Io(e.to_string()))?;
            }
            if verdict.passed {
                Ok(value)
            } else {
                emit(&value);
                Err(Failure::Numerical("verification failed".into()))
            }
        }
    }
}

/// Prints a JSON document; a closed stdout is not an error.
fn emit(value: &Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).unwrap_or_default();
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(value) => {
            emit(&value);
            ExitCode::SUCCESS
        }
        Err(failure) => {
            match &failure {
                Failure::Timeout(report) => {
                    emit(report);
                    eprintln!("gllab: t_max reached before convergence");
                }
                Failure::Input(m) | Failure::Numerical(m) | Failure::Io(m) => eprintln!("gllab: {m}"),
            }
            ExitCode::from(failure.code())
        }
    }
}
