//! `vaxsite`: build, solve, export, and evaluate mega-site vaccination
//! plans from CSV inputs.
//!
//! Exit codes: 0 success, 2 infeasible model or plan, 3 input error,
//! 4 internal invariant breach.

mod commands;
mod config;
mod manifest;
mod pipeline;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Infeasible(String),
    Internal(String),
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self::Input(message.into())
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self::Infeasible(message.into())
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::Internal(message.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Infeasible(_) => 2,
            Self::Input(_) => 3,
            Self::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Input(m) | Self::Infeasible(m) | Self::Internal(m) => m,
        }
    }
}

impl From<vaxsite_core::ingest::IngestError> for CliError {
    fn from(error: vaxsite_core::ingest::IngestError) -> Self {
        Self::Input(error.to_string())
    }
}

impl From<vaxsite_core::plan::PlanError> for CliError {
    fn from(error: vaxsite_core::plan::PlanError) -> Self {
        match error {
            vaxsite_core::plan::PlanError::InfeasiblePlan { .. } => {
                Self::Infeasible(error.to_string())
            }
            other => Self::Input(other.to_string()),
        }
    }
}

impl From<vaxsite_core::solve::SolveError> for CliError {
    fn from(error: vaxsite_core::solve::SolveError) -> Self {
        use vaxsite_core::solve::SolveError::*;
        match &error {
            Plan(vaxsite_core::plan::PlanError::InfeasiblePlan { .. }) => {
                Self::Infeasible(error.to_string())
            }
            TimeBudget => Self::Internal(error.to_string()),
            _ => Self::Input(error.to_string()),
        }
    }
}

impl From<vaxsite_core::epi::EpiError> for CliError {
    fn from(error: vaxsite_core::epi::EpiError) -> Self {
        Self::Input(error.to_string())
    }
}

impl From<vaxsite_core::travel::TravelError> for CliError {
    fn from(error: vaxsite_core::travel::TravelError) -> Self {
        Self::Input(error.to_string())
    }
}

impl From<vaxsite_core::evaluate::EvalError> for CliError {
    fn from(error: vaxsite_core::evaluate::EvalError) -> Self {
        Self::Input(error.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(error: std::io::Error) -> Self {
        Self::Input(error.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "vaxsite",
    about = "Mega-site location, vaccine allocation, and epidemic evaluation",
    version
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Config file (key = value lines, # comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for this run.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. --set lambda=5 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Formulation: p0, p1, p2, p2-fixed.
    #[arg(long, global = true)]
    formulation: Option<String>,
    /// Mega-site budget K.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Public-health objective weight.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Equity objective weight.
    #[arg(long = "lambda-eq", global = true)]
    lambda_eq: Option<f64>,
    /// Comma-separated district ids to pin open (p2-fixed).
    #[arg(long = "fixed-sites", global = true)]
    fixed_sites: Option<String>,
    /// Solver backend: exhaustive or mps.
    #[arg(long, global = true)]
    backend: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate all configured inputs, print a summary.
    IngestCheck,
    /// Build the configured formulation and print model statistics.
    Build {
        /// Also write the model as free-format MPS to this file.
        #[arg(long)]
        mps: Option<PathBuf>,
    },
    /// Build and solve, writing plan.sol and metrics.csv.
    Solve,
    /// Write the model as free-format MPS.
    ExportMps {
        /// Output file (default <out>/model.mps).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Read an external `name value` solution, validate, and store it.
    ImportSolution {
        /// Solution file.
        #[arg(long)]
        solution: PathBuf,
    },
    /// Validate a solution file against the model and list violations.
    Validate {
        /// Solution file.
        #[arg(long)]
        solution: PathBuf,
    },
    /// Run the compartmental model and write trajectory.csv.
    Simulate {
        /// Days to simulate (defaults to baseline_days).
        #[arg(long)]
        days: Option<u32>,
        /// Apply the vaccination schedule from this plan file.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Fit the compartmental model to observed.csv interval by interval.
    Calibrate,
    /// Compare infections with and without a plan's vaccinations.
    Evaluate {
        /// Plan (solution) file to evaluate.
        #[arg(long)]
        plan: PathBuf,
        /// Scale each flow by its logit acceptance likelihood.
        #[arg(long)]
        acceptance: bool,
    },
    /// Sweep the objective weights, solving and simulating each point.
    Sweep,
    /// Summarize the artifacts in the output directory.
    Report,
}

fn resolve_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    config.apply_overrides(&common.overrides)?;
    if let Some(formulation) = &common.formulation {
        config.formulation = config::FormulationChoice::parse(formulation)?;
    }
    if let Some(k) = common.k {
        config.k = k;
    }
    if let Some(lambda) = common.lambda {
        config.lambda = lambda;
    }
    if let Some(lambda_eq) = common.lambda_eq {
        config.lambda_eq = lambda_eq;
    }
    if let Some(fixed) = &common.fixed_sites {
        config.fixed_sites = fixed
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect();
    }
    if let Some(backend) = &common.backend {
        config.backend = config::BackendChoice::parse(backend)?;
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = resolve_config(&cli.common)?;
    std::fs::create_dir_all(&cli.common.out)
        .map_err(|e| CliError::input(format!("cannot create output directory: {e}")))?;
    let out = cli.common.out.clone();
    match cli.command {
        Command::IngestCheck => commands::ingest_check(&config, &out),
        Command::Build { mps } => commands::build(&config, &out, mps.as_deref()),
        Command::Solve => commands::solve(&config, &out),
        Command::ExportMps { file } => commands::export_mps(&config, &out, file.as_deref()),
        Command::ImportSolution { solution } => {
            commands::import_solution(&config, &out, &solution)
        }
        Command::Validate { solution } => commands::validate(&config, &out, &solution),
        Command::Simulate { days, plan } => {
            commands::simulate(&config, &out, days, plan.as_deref())
        }
        Command::Calibrate => commands::calibrate(&config, &out),
        Command::Evaluate { plan, acceptance } => {
            commands::evaluate(&config, &out, &plan, acceptance)
        }
        Command::Sweep => commands::sweep(&config, &out),
        Command::Report => commands::report(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            // Help and version requests are not errors.
            if error.use_stderr() {
                eprintln!("{error}");
                return ExitCode::from(3);
            }
            print!("{error}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {}", error.message());
            ExitCode::from(error.exit_code())
        }
    }
}
