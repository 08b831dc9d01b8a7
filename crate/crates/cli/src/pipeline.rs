//! Shared plumbing: loading the configured inputs and assembling models,
//! epidemic parameters, and vaccination schedules.

use std::path::Path;

use vaxsite_core::epi::{estimate_kappa, herd_immunity_targets, priority_scores, PriorityScores};
use vaxsite_core::grid::Grid;
use vaxsite_core::ingest::{
    self, CommuterMatrix, DistrictTable, SupplySchedule, TravelMatrix,
};
use vaxsite_core::plan::{build_p1, build_p2, build_p2_fixed, AllocationPlan, PlanModel};
use vaxsite_core::travel::{AcceptanceModel, TravelModel};
use vaxsite_core::{EpiParams, EpiState};

use crate::config::{FormulationChoice, RunConfig};
use crate::CliError;

/// Everything the planning-side commands need.
pub struct Inputs {
    pub table: DistrictTable,
    pub commuters: CommuterMatrix,
    pub travel: TravelModel<f64>,
    pub supply: SupplySchedule,
}

pub fn load_inputs(config: &RunConfig) -> Result<Inputs, CliError> {
    let table = ingest::load_districts(&config.districts)?;
    let commuters = match &config.commuters {
        Some(path) => ingest::load_commuters(path, &table, config.occupancy_scale)?,
        None => CommuterMatrix::zero(table.len()),
    };
    let travel_matrix: TravelMatrix<f64> = ingest::load_travel_matrix(&config.travel, &table)?;
    let travel = TravelModel::new(travel_matrix);
    let supply = match &config.supply {
        Some(path) => ingest::load_supply(
            path,
            &table,
            config.horizon,
            config.equity_horizon,
            config.capacity,
        )?,
        None => SupplySchedule::uniform(
            table.len(),
            config.horizon,
            config.equity_horizon,
            config.capacity,
        )?,
    };
    Ok(Inputs {
        table,
        commuters,
        travel,
        supply,
    })
}

/// Herd-immunity targets from the configured transmission inputs.
pub fn load_targets(config: &RunConfig, inputs: &Inputs) -> Result<Vec<f64>, CliError> {
    let n = inputs.table.len();
    let beta = match &config.beta {
        Some(path) => ingest::load_pair_matrix(path, &inputs.table, 0.0)?,
        None => {
            return Err(CliError::input(
                "the multi-objective formulation needs a beta matrix (config key `beta`)",
            ))
        }
    };
    let kappa = match (&config.kappa, &config.prevalence) {
        (Some(path), _) => ingest::load_pair_matrix(path, &inputs.table, 1.0)?,
        (None, Some(path)) => {
            let prevalence: Vec<f64> = ingest::load_district_column(path, &inputs.table)?;
            estimate_kappa(&prevalence)?
        }
        (None, None) => Grid::filled(n, n, 1.0),
    };
    let params = vaxsite_core::epi::SirParams::new(beta, config.gamma, kappa)?;
    Ok(herd_immunity_targets(&params)?)
}

pub fn load_scores(config: &RunConfig, inputs: &Inputs) -> Result<PriorityScores<f64>, CliError> {
    Ok(priority_scores(
        &inputs.commuters,
        config.horizon,
        config.decay,
    )?)
}

pub fn resolve_fixed_sites(
    config: &RunConfig,
    table: &DistrictTable,
) -> Result<Vec<usize>, CliError> {
    config
        .fixed_sites
        .iter()
        .map(|id| {
            table
                .index_of(id)
                .ok_or_else(|| CliError::input(format!("unknown fixed site {id:?}")))
        })
        .collect()
}

/// Build the configured formulation.
pub fn build_model(config: &RunConfig, inputs: &Inputs) -> Result<PlanModel<f64>, CliError> {
    let model = match config.formulation {
        FormulationChoice::P0 => build_p1(
            &inputs.table,
            &inputs.commuters,
            &inputs.travel,
            &inputs.supply,
            config.k,
            false,
        )?,
        FormulationChoice::P1 => build_p1(
            &inputs.table,
            &inputs.commuters,
            &inputs.travel,
            &inputs.supply,
            config.k,
            true,
        )?,
        FormulationChoice::P2 => {
            let targets = load_targets(config, inputs)?;
            let scores = load_scores(config, inputs)?;
            build_p2(
                &inputs.table,
                &inputs.commuters,
                &inputs.travel,
                &inputs.supply,
                config.k,
                &targets,
                &scores,
                config.lambda,
                config.lambda_eq,
            )?
        }
        FormulationChoice::P2Fixed => {
            let targets = load_targets(config, inputs)?;
            let scores = load_scores(config, inputs)?;
            let fixed = resolve_fixed_sites(config, &inputs.table)?;
            build_p2_fixed(
                &inputs.table,
                &inputs.commuters,
                &inputs.travel,
                &inputs.supply,
                config.k,
                &targets,
                &scores,
                config.lambda,
                config.lambda_eq,
                &fixed,
            )?
        }
    };
    Ok(model)
}

/// Compartmental parameters from the config's scalar rates and matrix
/// files; transmission defaults to a uniform mixing of the SIR beta file
/// when the dedicated matrices are absent.
pub fn load_epi_params(config: &RunConfig, inputs: &Inputs) -> Result<EpiParams, CliError> {
    let n = inputs.table.len();
    let beta_identified = match &config.epi_beta_identified {
        Some(path) => ingest::load_pair_matrix(path, &inputs.table, 0.0)?,
        None => match &config.beta {
            Some(path) => ingest::load_pair_matrix(path, &inputs.table, 0.0)?,
            None => Grid::filled(n, n, 0.2 / n as f64),
        },
    };
    let beta_unidentified = match &config.epi_beta_unidentified {
        Some(path) => ingest::load_pair_matrix(path, &inputs.table, 0.0)?,
        None => beta_identified.clone(),
    };
    let params = EpiParams {
        beta_identified,
        beta_unidentified,
        delta_identified: config.epi_delta_identified,
        delta_unidentified: config.epi_delta_unidentified,
        gamma_identified: config.epi_gamma_identified,
        gamma_unidentified: config.epi_gamma_unidentified,
        gamma_hospital: config.epi_gamma_hospital,
        mu_identified: config.epi_mu_identified,
        mu_unidentified: config.epi_mu_unidentified,
        mu_hospital: config.epi_mu_hospital,
        eta: config.epi_eta,
        theta: config.epi_theta,
        zero_latency: false,
    };
    params.validate()?;
    Ok(params)
}

/// Initial compartmental state: either a full CSV or the configured
/// exposed seed per district, at the configured population scale.
pub fn load_initial_state(config: &RunConfig, inputs: &Inputs) -> Result<EpiState, CliError> {
    if let Some(path) = &config.initial_state {
        return load_state_csv(path, &inputs.table);
    }
    let scale = config.population_scale;
    let populations: Vec<f64> = inputs
        .table
        .populations()
        .iter()
        .map(|&p| p as f64 * scale)
        .collect();
    let n = populations.len();
    let mut state = EpiState {
        susceptible: populations.clone(),
        vaccinated: vec![0.0; n],
        exposed: vec![0.0; n],
        infectious_identified: vec![0.0; n],
        infectious_unidentified: vec![0.0; n],
        hospitalized: vec![0.0; n],
        recovered: vec![0.0; n],
        dead: vec![0.0; n],
    };
    for v in 0..n {
        let seed = config.seed_exposed.min(populations[v]);
        state.exposed[v] = seed;
        state.susceptible[v] -= seed;
    }
    Ok(state)
}

fn load_state_csv(path: &Path, table: &DistrictTable) -> Result<EpiState, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != "district_id,S,V,E,I,U,H,R,D" {
        return Err(CliError::input(format!(
            "{}: expected header district_id,S,V,E,I,U,H,R,D",
            path.display()
        )));
    }
    let n = table.len();
    let mut state = EpiState {
        susceptible: vec![0.0; n],
        vaccinated: vec![0.0; n],
        exposed: vec![0.0; n],
        infectious_identified: vec![0.0; n],
        infectious_unidentified: vec![0.0; n],
        hospitalized: vec![0.0; n],
        recovered: vec![0.0; n],
        dead: vec![0.0; n],
    };
    for (index, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 9 {
            return Err(CliError::input(format!(
                "{} line {}: expected 9 fields",
                path.display(),
                index + 2
            )));
        }
        let district = table.index_of(fields[0]).ok_or_else(|| {
            CliError::input(format!("unknown district {:?} in {}", fields[0], path.display()))
        })?;
        let mut values = [0.0f64; 8];
        for (slot, field) in fields[1..].iter().enumerate() {
            values[slot] = field.parse().map_err(|_| {
                CliError::input(format!("bad number {field:?} in {}", path.display()))
            })?;
        }
        state.susceptible[district] = values[0];
        state.vaccinated[district] = values[1];
        state.exposed[district] = values[2];
        state.infectious_identified[district] = values[3];
        state.infectious_unidentified[district] = values[4];
        state.hospitalized[district] = values[5];
        state.recovered[district] = values[6];
        state.dead[district] = values[7];
    }
    Ok(state)
}

/// Vaccination schedule from a plan, at the configured population scale so
/// dose counts live on the same scale as the epidemic state.
pub fn schedule_from_plan(
    config: &RunConfig,
    inputs: &Inputs,
    plan: &AllocationPlan,
    use_acceptance: bool,
) -> Result<vaxsite_core::evaluate::VaccinationSchedule<f64>, CliError> {
    let acceptance = if use_acceptance {
        Some(AcceptanceModel::new(&inputs.travel, &plan.open_sites())?)
    } else {
        None
    };
    let schedule = vaxsite_core::evaluate::VaccinationSchedule::from_plan(
        plan,
        acceptance.as_ref(),
        config.period_days,
        config.vax_start_day,
    )?;
    Ok(schedule.scaled(config.population_scale))
}
