//! Run configuration: paper defaults, `key = value` config files with `#`
//! comments, and command-line overrides layered on top.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Which model to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationChoice {
    P0,
    P1,
    P2,
    P2Fixed,
}

impl FormulationChoice {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        match text.to_ascii_lowercase().as_str() {
            "p0" => Ok(Self::P0),
            "p1" => Ok(Self::P1),
            "p2" => Ok(Self::P2),
            "p2-fixed" | "p2fixed" => Ok(Self::P2Fixed),
            other => Err(CliError::input(format!(
                "unknown formulation {other:?} (expected p0, p1, p2, p2-fixed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Exhaustive,
    Mps,
}

impl BackendChoice {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        match text.to_ascii_lowercase().as_str() {
            "exhaustive" => Ok(Self::Exhaustive),
            "mps" => Ok(Self::Mps),
            other => Err(CliError::input(format!(
                "unknown backend {other:?} (expected exhaustive or mps)"
            ))),
        }
    }
}

/// Fully resolved run configuration. Numeric defaults follow the paper's
/// base case: six sites, 400,000 monthly doses each, six monthly periods,
/// a two-period equity window, weights 10 and 150, decay 0.9, and the 1.53
/// vehicle-occupancy scale.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub districts: PathBuf,
    pub commuters: Option<PathBuf>,
    pub travel: PathBuf,
    pub supply: Option<PathBuf>,
    pub beta: Option<PathBuf>,
    pub kappa: Option<PathBuf>,
    pub prevalence: Option<PathBuf>,
    pub observed: Option<PathBuf>,
    pub initial_state: Option<PathBuf>,
    pub epi_beta_identified: Option<PathBuf>,
    pub epi_beta_unidentified: Option<PathBuf>,

    pub k: usize,
    pub horizon: usize,
    pub equity_horizon: usize,
    pub capacity: u64,
    pub lambda: f64,
    pub lambda_eq: f64,
    pub decay: f64,
    pub gamma: f64,
    pub dt: f64,
    pub occupancy_scale: f64,
    pub formulation: FormulationChoice,
    pub fixed_sites: Vec<String>,
    pub backend: BackendChoice,
    pub lambda_grid: Vec<f64>,
    pub lambda_eq_grid: Vec<f64>,
    pub jobs: usize,
    pub seed: u64,
    pub max_subsets: u64,
    pub time_budget_secs: u64,

    // Compartmental-model knobs.
    pub period_days: u32,
    pub baseline_days: u32,
    pub vax_start_day: u32,
    pub seed_exposed: f64,
    pub population_scale: f64,
    pub epi_delta_identified: f64,
    pub epi_delta_unidentified: f64,
    pub epi_gamma_identified: f64,
    pub epi_gamma_unidentified: f64,
    pub epi_gamma_hospital: f64,
    pub epi_mu_identified: f64,
    pub epi_mu_unidentified: f64,
    pub epi_mu_hospital: f64,
    pub epi_eta: f64,
    pub epi_theta: f64,

    // Calibration knobs.
    pub intervals: Vec<(String, u32)>,
    pub calib_budget: usize,
    pub calib_restarts: usize,
    pub weight_deaths: f64,
    pub weight_cumulative: f64,
    pub weight_cases: f64,
    pub weight_hospital: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            districts: PathBuf::from("districts.csv"),
            commuters: None,
            travel: PathBuf::from("travel.csv"),
            supply: None,
            beta: None,
            kappa: None,
            prevalence: None,
            observed: None,
            initial_state: None,
            epi_beta_identified: None,
            epi_beta_unidentified: None,
            k: 6,
            horizon: 6,
            equity_horizon: 2,
            capacity: 400_000,
            lambda: 10.0,
            lambda_eq: 150.0,
            decay: 0.9,
            gamma: 0.1,
            dt: 0.1,
            occupancy_scale: 1.53,
            formulation: FormulationChoice::P2,
            fixed_sites: Vec::new(),
            backend: BackendChoice::Exhaustive,
            lambda_grid: vec![0.0, 5.0, 10.0],
            lambda_eq_grid: vec![0.0, 150.0, 1000.0],
            jobs: 1,
            seed: 7,
            max_subsets: 100_000,
            time_budget_secs: 120,
            period_days: 30,
            baseline_days: 300,
            vax_start_day: 120,
            seed_exposed: 10.0,
            population_scale: 1.0,
            epi_delta_identified: 0.15,
            epi_delta_unidentified: 0.05,
            epi_gamma_identified: 0.1,
            epi_gamma_unidentified: 0.12,
            epi_gamma_hospital: 0.07,
            epi_mu_identified: 0.002,
            epi_mu_unidentified: 0.001,
            epi_mu_hospital: 0.02,
            epi_eta: 0.02,
            epi_theta: 0.005,
            intervals: vec![
                ("lockdown".into(), 45),
                ("social".into(), 45),
                ("reopen".into(), 45),
                ("second_wave".into(), 75),
                ("holiday".into(), 90),
            ],
            calib_budget: 2000,
            calib_restarts: 3,
            weight_deaths: 1.0,
            weight_cumulative: 1.0,
            weight_cases: 1.0,
            weight_hospital: 1.0,
        }
    }
}

fn parse_intervals(text: &str) -> Result<Vec<(String, u32)>, CliError> {
    text.split(',')
        .filter(|chunk| !chunk.trim().is_empty())
        .map(|chunk| {
            let (name, days) = chunk.split_once(':').ok_or_else(|| {
                CliError::input(format!("interval {chunk:?} must be name:days"))
            })?;
            let days: u32 = days
                .trim()
                .parse()
                .map_err(|_| CliError::input(format!("bad interval length in {chunk:?}")))?;
            Ok((name.trim().to_owned(), days))
        })
        .collect()
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|chunk| !chunk.is_empty())
        .map(|chunk| {
            chunk
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("bad grid value {chunk:?}")))
        })
        .collect()
}

impl RunConfig {
    /// Read a config file and layer it over the defaults. Relative paths in
    /// the file resolve against the file's own directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut config = Self::default();
        let mut pairs = BTreeMap::new();
        for (line_index, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| {
                CliError::input(format!(
                    "{} line {}: expected key = value",
                    path.display(),
                    line_index + 1
                ))
            })?;
            pairs.insert(key.trim().to_owned(), value.trim().to_owned());
        }
        for (key, value) in pairs {
            config.apply(&key, &value, Some(base))?;
        }
        Ok(config)
    }

    /// Apply one `key = value` assignment; `base` anchors relative paths.
    pub fn apply(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<(), CliError> {
        let path_of = |value: &str| -> PathBuf {
            let p = PathBuf::from(value);
            match (p.is_relative(), base) {
                (true, Some(base)) => base.join(p),
                _ => p,
            }
        };
        let bad_number = |key: &str, value: &str| {
            CliError::input(format!("bad numeric value {value:?} for {key}"))
        };
        match key {
            "districts" => self.districts = path_of(value),
            "commuters" => self.commuters = Some(path_of(value)),
            "travel" => self.travel = path_of(value),
            "supply" => self.supply = Some(path_of(value)),
            "beta" => self.beta = Some(path_of(value)),
            "kappa" => self.kappa = Some(path_of(value)),
            "prevalence" => self.prevalence = Some(path_of(value)),
            "observed" => self.observed = Some(path_of(value)),
            "initial_state" => self.initial_state = Some(path_of(value)),
            "epi_beta_i" => self.epi_beta_identified = Some(path_of(value)),
            "epi_beta_u" => self.epi_beta_unidentified = Some(path_of(value)),
            "k" => self.k = value.parse().map_err(|_| bad_number(key, value))?,
            "horizon" => self.horizon = value.parse().map_err(|_| bad_number(key, value))?,
            "equity_horizon" => {
                self.equity_horizon = value.parse().map_err(|_| bad_number(key, value))?
            }
            "capacity" => self.capacity = value.parse().map_err(|_| bad_number(key, value))?,
            "lambda" => self.lambda = value.parse().map_err(|_| bad_number(key, value))?,
            "lambda_eq" => self.lambda_eq = value.parse().map_err(|_| bad_number(key, value))?,
            "decay" => self.decay = value.parse().map_err(|_| bad_number(key, value))?,
            "gamma" => self.gamma = value.parse().map_err(|_| bad_number(key, value))?,
            "dt" => self.dt = value.parse().map_err(|_| bad_number(key, value))?,
            "occupancy_scale" => {
                self.occupancy_scale = value.parse().map_err(|_| bad_number(key, value))?
            }
            "formulation" => self.formulation = FormulationChoice::parse(value)?,
            "fixed_sites" => {
                self.fixed_sites = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_owned)
                    .collect()
            }
            "backend" => self.backend = BackendChoice::parse(value)?,
            "lambda_grid" => self.lambda_grid = parse_grid(value)?,
            "lambda_eq_grid" => self.lambda_eq_grid = parse_grid(value)?,
            "jobs" => self.jobs = value.parse().map_err(|_| bad_number(key, value))?,
            "seed" => self.seed = value.parse().map_err(|_| bad_number(key, value))?,
            "max_subsets" => {
                self.max_subsets = value.parse().map_err(|_| bad_number(key, value))?
            }
            "time_budget_secs" => {
                self.time_budget_secs = value.parse().map_err(|_| bad_number(key, value))?
            }
            "period_days" => {
                self.period_days = value.parse().map_err(|_| bad_number(key, value))?
            }
            "baseline_days" => {
                self.baseline_days = value.parse().map_err(|_| bad_number(key, value))?
            }
            "vax_start_day" => {
                self.vax_start_day = value.parse().map_err(|_| bad_number(key, value))?
            }
            "seed_exposed" => {
                self.seed_exposed = value.parse().map_err(|_| bad_number(key, value))?
            }
            "population_scale" => {
                self.population_scale = value.parse().map_err(|_| bad_number(key, value))?
            }
            "epi_delta_i" => {
                self.epi_delta_identified = value.parse().map_err(|_| bad_number(key, value))?
            }
            "epi_delta_u" => {
                self.epi_delta_unidentified = value.parse().map_err(|_| bad_number(key, value))?
            }
            "epi_gamma_i" => {
                self.epi_gamma_identified = value.parse().map_err(|_| bad_number(key, value))?
            }
            "epi_gamma_u" => {
                self.epi_gamma_unidentified = value.parse().map_err(|_| bad_number(key, value))?
            }
            "epi_gamma_h" => {
                self.epi_gamma_hospital = value.parse().map_err(|_| bad_number(key, value))?
            }
            "epi_mu_i" => {
                self.epi_mu_identified = value.parse().map_err(|_| bad_number(key, value))?
            }
            "epi_mu_u" => {
                self.epi_mu_unidentified = value.parse().map_err(|_| bad_number(key, value))?
            }
            "epi_mu_h" => {
                self.epi_mu_hospital = value.parse().map_err(|_| bad_number(key, value))?
            }
            "epi_eta" => self.epi_eta = value.parse().map_err(|_| bad_number(key, value))?,
            "epi_theta" => self.epi_theta = value.parse().map_err(|_| bad_number(key, value))?,
            "intervals" => self.intervals = parse_intervals(value)?,
            "calib_budget" => {
                self.calib_budget = value.parse().map_err(|_| bad_number(key, value))?
            }
            "calib_restarts" => {
                self.calib_restarts = value.parse().map_err(|_| bad_number(key, value))?
            }
            "weight_deaths" => {
                self.weight_deaths = value.parse().map_err(|_| bad_number(key, value))?
            }
            "weight_cumulative" => {
                self.weight_cumulative = value.parse().map_err(|_| bad_number(key, value))?
            }
            "weight_cases" => {
                self.weight_cases = value.parse().map_err(|_| bad_number(key, value))?
            }
            "weight_hospital" => {
                self.weight_hospital = value.parse().map_err(|_| bad_number(key, value))?
            }
            other => {
                return Err(CliError::input(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Apply `key=value` override strings from the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), CliError> {
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                CliError::input(format!("override {item:?} must be key=value"))
            })?;
            self.apply(key.trim(), value.trim(), None)?;
        }
        Ok(())
    }
}
