//! Command-line front end.
//!
//! Every command reads defaults, an optional `--config` JSON document and
//! `--key value` overrides, then writes deterministic CSV/JSON files into
//! `out_dir`. Exit codes: 0 success, 2 configuration, 3 numerical, 4 I/O.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{OutputFormat, RunConfig, TauGrid};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(crate::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dampqfi",
    version,
    about = "Dissipation-rate precision under linear and Kerr controls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// QFI against τ for no, linear, Kerr and both controls (exact and closed form)
    QfiCurve(RunArgs),
    /// Fidelity with the initial state against τ (Uhlmann and closed form)
    FidelityCurve(RunArgs),
    /// ε-constrained maximisation of the peak QFI over the control grid
    Optimize(RunArgs),
    /// Peak QFI and deformation over (u2, |α|²) with u1 = 0
    ScanAlpha(RunArgs),
    /// Simulated homodyne record and the posterior over candidate rates
    Estimate(RunArgs),
    /// Density matrix along the τ grid from the closed form and from RK4
    Evolve(RunArgs),
}

/// Options shared by every command. Structured values (`tau_grid`, `grid`,
/// `epsilons`, `candidates`) take JSON, e.g. `--epsilons '[0.1,0.2]'`.
#[derive(Debug, Args)]
struct RunArgs {
    /// JSON configuration document
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    #[arg(
        long = "alpha_re",
        alias = "alpha-re",
        value_name = "X",
        allow_hyphen_values = true
    )]
    alpha_re: Option<String>,
    #[arg(
        long = "alpha_im",
        alias = "alpha-im",
        value_name = "X",
        allow_hyphen_values = true
    )]
    alpha_im: Option<String>,
    #[arg(long, value_name = "X")]
    gamma: Option<String>,
    #[arg(long, value_name = "X")]
    u1: Option<String>,
    #[arg(long, value_name = "X")]
    u2: Option<String>,
    #[arg(long, value_name = "N")]
    dim: Option<String>,
    /// [start, stop, count]
    #[arg(long = "tau_grid", alias = "tau-grid", value_name = "JSON")]
    tau_grid: Option<String>,
    /// {"u1_range": [lo, hi, n], "u2_range": [...], "alpha2_range": [...]}
    #[arg(long, value_name = "JSON")]
    grid: Option<String>,
    #[arg(long, value_name = "JSON")]
    epsilons: Option<String>,
    #[arg(long, value_name = "N")]
    seed: Option<String>,
    #[arg(long, value_name = "X")]
    efficiency: Option<String>,
    #[arg(long, value_name = "X")]
    duration: Option<String>,
    #[arg(long, value_name = "X")]
    dt: Option<String>,
    #[arg(long = "out_dir", alias = "out-dir", value_name = "DIR")]
    out_dir: Option<String>,
    /// csv or json
    #[arg(long, value_name = "FORMAT")]
    format: Option<String>,
    /// {"rates": [...]} or {"center": x, "spread": s, "count": n}
    #[arg(long, value_name = "JSON")]
    candidates: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        [
            ("scenario", &self.scenario),
            ("alpha_re", &self.alpha_re),
            ("alpha_im", &self.alpha_im),
            ("gamma", &self.gamma),
            ("u1", &self.u1),
            ("u2", &self.u2),
            ("dim", &self.dim),
            ("tau_grid", &self.tau_grid),
            ("grid", &self.grid),
            ("epsilons", &self.epsilons),
            ("seed", &self.seed),
            ("efficiency", &self.efficiency),
            ("duration", &self.duration),
            ("dt", &self.dt),
            ("out_dir", &self.out_dir),
            ("format", &self.format),
            ("candidates", &self.candidates),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect()
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

type Handler = fn(&RunConfig) -> Result<Vec<PathBuf>, CliError>;

fn execute(command: Command) -> Result<Vec<PathBuf>, CliError> {
    let (name, args, f): (&str, RunArgs, Handler) = match command {
        Command::QfiCurve(a) => ("qfi-curve", a, commands::qfi_curve),
        Command::FidelityCurve(a) => ("fidelity-curve", a, commands::fidelity_curve),
        Command::Optimize(a) => ("optimize", a, commands::optimize),
        Command::ScanAlpha(a) => ("scan-alpha", a, commands::scan_alpha),
        Command::Estimate(a) => ("estimate", a, commands::estimate),
        Command::Evolve(a) => ("evolve", a, commands::evolve),
    };
    let config = RunConfig::load(name, args.config.as_deref(), &args.overrides())?;
    f(&config)
}
