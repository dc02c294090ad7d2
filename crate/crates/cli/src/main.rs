//! Command-line driver for the cone wavelet pipeline.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conewave::Error;
use serde_json::{json, Value};

use commands::{Context, Outcome};
use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "bad_config",
            CliError::Core(e) => match e {
                Error::Config(_) | Error::Dimension { .. } | Error::Unsupported(_) | Error::Grid(_) => "bad_config",
                Error::Io(_) => "io",
                Error::NotInCone => "not_in_cone",
                Error::Quadrature(_) => "quadrature",
                Error::Uncovered { .. } => "uncovered",
                Error::Lattice(_) => "lattice",
                Error::Budget { .. } => "budget",
                Error::Divergence { .. } => "divergence",
                Error::NotConverged { .. } => "not_converged",
            },
        }
    }

    fn exit(&self) -> u8 {
        match self.code() {
            "bad_config" | "io" | "budget" => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "conewave", version, about = "Wavelet analysis, Besov norms and frames on symmetric cones")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the report and tensor artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Cone dimensions, identity and the derived coorbit exponent.
    ConeInfo,
    /// Build the wavelet and report its admissibility quadrature.
    WaveletBuild,
    /// Wavelet coefficients of the configured signals.
    Transform,
    /// Continuous and discrete Besov norms and their ratio.
    Besov,
    /// Cone lattice and frequency partition.
    Lattice,
    /// Empirical frame constants of the sampling set.
    FrameBounds,
    /// Iterative reconstruction from frame data.
    Reconstruct,
    /// The full acceptance suite.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ConeInfo => "cone-info",
            Command::WaveletBuild => "wavelet-build",
            Command::Transform => "transform",
            Command::Besov => "besov",
            Command::Lattice => "lattice",
            Command::FrameBounds => "frame-bounds",
            Command::Reconstruct => "reconstruct",
            Command::Selftest => "selftest",
        }
    }
}

/// Floats become decimal strings with 17 significant digits.
fn decimalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => Value::String(format!("{:.16e}", n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(a) => Value::Array(a.into_iter().map(decimalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, decimalize(v))).collect()),
        other => other,
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(k) = cli.threads.or(cfg.threads) {
        if k == 0 {
            return Err(CliError::Config("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(d) = &cli.out {
        std::fs::create_dir_all(d).map_err(|e| CliError::Core(e.into()))?;
    }
    let ctx = Context { cfg: &cfg, out: cli.out.as_deref(), verbose: cli.verbose };
    match cli.command {
        Command::ConeInfo => commands::cone_info(&ctx),
        Command::WaveletBuild => commands::wavelet_build(&ctx),
        Command::Transform => commands::transform(&ctx),
        Command::Besov => commands::besov(&ctx),
        Command::Lattice => commands::lattice(&ctx),
        Command::FrameBounds => commands::frame_bounds_cmd(&ctx),
        Command::Reconstruct => commands::reconstruct_cmd(&ctx),
        Command::Selftest => commands::selftest(&ctx),
    }
}

fn emit(cli: &Cli, name: &str, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))?;
    println!("{text}");
    if let Some(d) = &cli.out {
        std::fs::write(d.join(format!("{name}.json")), text + "\n").map_err(|e| CliError::Core(e.into()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let result = run(&cli).and_then(|o| {
        let report = json!({ "command": name, "result": decimalize(o.report) });
        emit(&cli, name, &report).map(|_| o.exit)
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let err = json!({ "command": name, "code": e.code(), "message": e.to_string() });
            let _ = emit(&cli, "error", &err);
            ExitCode::from(e.exit())
        }
    }
}
