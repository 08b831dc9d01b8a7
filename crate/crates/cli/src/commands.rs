//! Subcommand implementations. Each command records a manifest in the run
//! directory and writes its artifacts there.

use std::fmt::Write as _;
use std::path::Path;

use vaxsite_core::evaluate::{
    self, infections_averted, simulate_timeline, CalibrationConfig, CalibrationSpec,
    ObservedSeries,
};
use vaxsite_core::grid::Grid;
use vaxsite_core::plan::{PlanMetrics, PlanModel};
use vaxsite_core::solve::{self, solve_exhaustive, SolveLimits, SolveReport};

use crate::config::{BackendChoice, FormulationChoice, RunConfig};
use crate::manifest::{self, config_hash};
use crate::pipeline::{self, Inputs};
use crate::svg::{self, Series};
use crate::CliError;

fn limits(config: &RunConfig) -> SolveLimits {
    SolveLimits {
        max_subsets: config.max_subsets,
        time_budget: std::time::Duration::from_secs(config.time_budget_secs),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn metrics_csv(formulation: &str, metrics: &PlanMetrics<f64>) -> String {
    let mut out = String::from("formulation,travel_minutes,health_term,inequity,composite_objective\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{}",
        formulation, metrics.travel_minutes, metrics.health_term, metrics.inequity, metrics.composite
    );
    out
}

pub fn ingest_check(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    manifest::record(out, config, "ingest-check")?;
    let inputs = pipeline::load_inputs(config)?;
    let n = inputs.table.len();
    println!("districts: {n}");
    println!("population: {}", inputs.table.total_population());
    println!(
        "commuters: {} ({} non-commuters)",
        inputs.commuters.total_flow(),
        inputs.table.total_population() - inputs.commuters.total_flow()
    );
    println!(
        "supply: {} doses over {} periods (equity horizon {})",
        inputs.supply.total(),
        inputs.supply.horizon(),
        inputs.supply.equity_horizon()
    );
    if config.formulation == FormulationChoice::P2
        || config.formulation == FormulationChoice::P2Fixed
    {
        let targets = pipeline::load_targets(config, &inputs)?;
        let mean = targets.iter().sum::<f64>() / n as f64;
        println!("herd-immunity targets: mean {mean:.4}");
    }
    println!("ok");
    Ok(())
}

fn model_summary(config: &RunConfig, model: &PlanModel<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "formulation = {}", model.meta.formulation.tag());
    let _ = writeln!(
        out,
        "districts = {}, periods = {}, equity horizon = {}",
        model.meta.n, model.meta.horizon, model.meta.equity_horizon
    );
    let _ = writeln!(out, "k = {}", model.meta.k);
    let _ = writeln!(
        out,
        "lambda = {}, lambda_eq = {}, decay = {}",
        model.meta.lambda, model.meta.lambda_eq, config.decay
    );
    let y_count = model
        .variables
        .iter()
        .filter(|v| v.name.starts_with("Y_"))
        .count();
    let z_count = model
        .variables
        .iter()
        .filter(|v| v.name.starts_with("Z_"))
        .count();
    let _ = writeln!(
        out,
        "variables = {} (x {}, y {}, z {}, penalty {})",
        model.n_vars(),
        model.meta.n,
        y_count,
        z_count,
        model.n_vars() - model.meta.n - y_count - z_count
    );
    let _ = writeln!(out, "constraints = {}", model.n_constraints());
    for warning in &model.meta.warnings {
        let _ = writeln!(out, "warning: {warning}");
    }
    out
}

pub fn build(config: &RunConfig, out: &Path, mps: Option<&Path>) -> Result<(), CliError> {
    manifest::record(out, config, "build")?;
    let inputs = pipeline::load_inputs(config)?;
    let model = pipeline::build_model(config, &inputs)?;
    let summary = model_summary(config, &model);
    print!("{summary}");
    write_file(&out.join("build_summary.txt"), &summary)?;
    if let Some(mps_path) = mps {
        solve::export_mps(&model, mps_path)?;
        println!("mps written to {}", mps_path.display());
    }
    Ok(())
}

pub fn export_mps(config: &RunConfig, out: &Path, file: Option<&Path>) -> Result<(), CliError> {
    manifest::record(out, config, "export-mps")?;
    let inputs = pipeline::load_inputs(config)?;
    let model = pipeline::build_model(config, &inputs)?;
    let default_path = out.join("model.mps");
    let path = file.unwrap_or(&default_path);
    solve::export_mps(&model, path)?;
    println!(
        "exported {} columns, {} rows to {}",
        model.n_vars(),
        model.n_constraints(),
        path.display()
    );
    Ok(())
}

fn solve_summary(report: &SolveReport<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "status = {}", report.status.label());
    if let Some(objective) = report.objective {
        let _ = writeln!(out, "objective = {objective}");
    }
    let _ = writeln!(out, "gap = {}", report.gap);
    let _ = writeln!(out, "nodes_or_subsets = {}", report.nodes_or_subsets);
    let _ = writeln!(out, "wall_time_secs = {:.3}", report.wall_time_secs);
    out
}

/// Shared by `solve` and `sweep`: exhaustive-solve a model and evaluate it.
fn solve_model(
    config: &RunConfig,
    model: &PlanModel<f64>,
) -> Result<SolveReport<f64>, CliError> {
    let report = solve_exhaustive(model, &limits(config))?;
    Ok(report)
}

pub fn solve(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    manifest::record(out, config, "solve")?;
    let inputs = pipeline::load_inputs(config)?;
    let model = pipeline::build_model(config, &inputs)?;
    for warning in &model.meta.warnings {
        eprintln!("warning: {warning}");
    }
    if config.backend == BackendChoice::Mps {
        let path = out.join("model.mps");
        solve::export_mps(&model, &path)?;
        println!("status = exported");
        println!(
            "model written to {}; solve it externally and run import-solution",
            path.display()
        );
        return Ok(());
    }
    let report = solve_model(config, &model)?;
    let summary = solve_summary(&report);
    print!("{summary}");
    write_file(&out.join("solve_summary.txt"), &summary)?;
    match (&report.plan, &report.metrics) {
        (Some(plan), Some(metrics)) => {
            let header = vec![
                format!("vaxsite {} solve", env!("CARGO_PKG_VERSION")),
                format!("formulation {}", model.meta.formulation.tag()),
                format!("config {:016x} seed {}", config_hash(config), config.seed),
                format!("objective {}", metrics.composite),
            ];
            solve::write_solution(&model, plan, &header, &out.join("plan.sol"))?;
            write_file(
                &out.join("metrics.csv"),
                &metrics_csv(model.meta.formulation.tag(), metrics),
            )?;
            let open: Vec<&str> = plan
                .open_sites()
                .into_iter()
                .map(|w| inputs.table.id(w))
                .collect();
            println!("open sites: {}", open.join(", "));
            Ok(())
        }
        _ => Err(CliError::infeasible("no feasible allocation exists")),
    }
}

pub fn import_solution(config: &RunConfig, out: &Path, solution: &Path) -> Result<(), CliError> {
    manifest::record(out, config, "import-solution")?;
    let inputs = pipeline::load_inputs(config)?;
    let model = pipeline::build_model(config, &inputs)?;
    let (plan, metrics) = solve::import_solution(&model, solution)?;
    let header = vec![
        format!("vaxsite {} import-solution", env!("CARGO_PKG_VERSION")),
        format!("source {}", solution.display()),
        format!("objective {}", metrics.composite),
    ];
    solve::write_solution(&model, &plan, &header, &out.join("plan.sol"))?;
    write_file(
        &out.join("metrics.csv"),
        &metrics_csv(model.meta.formulation.tag(), &metrics),
    )?;
    println!("imported: objective = {}", metrics.composite);
    Ok(())
}

pub fn validate(config: &RunConfig, out: &Path, solution: &Path) -> Result<(), CliError> {
    manifest::record(out, config, "validate")?;
    let inputs = pipeline::load_inputs(config)?;
    let model = pipeline::build_model(config, &inputs)?;
    // Parse without the feasibility gate, then report violations.
    match solve::import_solution(&model, solution) {
        Ok((_, metrics)) => {
            println!("feasible; objective = {}", metrics.composite);
            Ok(())
        }
        Err(solve::SolveError::Plan(vaxsite_core::plan::PlanError::InfeasiblePlan {
            violations,
            ..
        })) => {
            println!("infeasible: {} violations", violations.len());
            for violation in &violations {
                println!("  {violation}");
            }
            Err(CliError::infeasible(format!(
                "{} constraint violations",
                violations.len()
            )))
        }
        Err(other) => Err(other.into()),
    }
}

fn trajectory_csv(table: &vaxsite_core::ingest::DistrictTable, trajectory: &[vaxsite_core::EpiState]) -> String {
    let mut out = String::from("day,district_id,S,V,E,I,U,H,R,D\n");
    for (day, state) in trajectory.iter().enumerate() {
        for v in 0..state.n() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                day,
                table.id(v),
                state.susceptible[v],
                state.vaccinated[v],
                state.exposed[v],
                state.infectious_identified[v],
                state.infectious_unidentified[v],
                state.hospitalized[v],
                state.recovered[v],
                state.dead[v],
            );
        }
    }
    out
}

pub fn simulate(
    config: &RunConfig,
    out: &Path,
    days: Option<u32>,
    plan_path: Option<&Path>,
) -> Result<(), CliError> {
    manifest::record(out, config, "simulate")?;
    let inputs = pipeline::load_inputs(config)?;
    let params = pipeline::load_epi_params(config, &inputs)?;
    let initial = pipeline::load_initial_state(config, &inputs)?;
    let days = days.unwrap_or(config.baseline_days);
    let schedule = match plan_path {
        Some(path) => {
            let model = pipeline::build_model(config, &inputs)?;
            let (plan, _) = solve::import_solution(&model, path)?;
            Some(pipeline::schedule_from_plan(config, &inputs, &plan, false)?)
        }
        None => None,
    };
    let trajectory = simulate_timeline(&initial, &[(params, days)], schedule.as_ref(), config.dt)?;
    write_file(
        &out.join("trajectory.csv"),
        &trajectory_csv(&inputs.table, &trajectory),
    )?;
    let last = trajectory.last().expect("non-empty trajectory");
    let cumulative: f64 = (0..last.n()).map(|v| last.identified_cumulative(v)).sum();
    println!("simulated {days} days; cumulative identified infections = {cumulative:.2}");
    println!("trajectory written to {}", out.join("trajectory.csv").display());
    Ok(())
}

fn load_observed(
    config: &RunConfig,
    inputs: &Inputs,
) -> Result<ObservedSeries<f64>, CliError> {
    let Some(path) = &config.observed else {
        return Err(CliError::input(
            "calibration needs an observed series (config key `observed`)",
        ));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != "date,district_id,cumulative_cases,cases,cumulative_deaths,hospitalizations"
    {
        return Err(CliError::input(format!(
            "{}: expected header date,district_id,cumulative_cases,cases,cumulative_deaths,hospitalizations",
            path.display()
        )));
    }
    let n = inputs.table.len();
    let mut rows: Vec<(usize, usize, [f64; 4])> = Vec::new();
    let mut max_day = 0usize;
    for (index, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(CliError::input(format!(
                "{} line {}: expected 6 fields",
                path.display(),
                index + 2
            )));
        }
        let day: usize = fields[0].parse().map_err(|_| {
            CliError::input(format!(
                "{} line {}: `date` must be a 0-based day index",
                path.display(),
                index + 2
            ))
        })?;
        let district = inputs.table.index_of(fields[1]).ok_or_else(|| {
            CliError::input(format!(
                "{} line {}: unknown district {:?}",
                path.display(),
                index + 2,
                fields[1]
            ))
        })?;
        let mut values = [0.0f64; 4];
        for (slot, field) in fields[2..].iter().enumerate() {
            values[slot] = field.parse().map_err(|_| {
                CliError::input(format!(
                    "{} line {}: bad number {field:?}",
                    path.display(),
                    index + 2
                ))
            })?;
        }
        max_day = max_day.max(day);
        rows.push((day, district, values));
    }
    let days = max_day + 1;
    let mut cumulative_cases = Grid::filled(days, n, f64::NAN);
    let mut cases = Grid::filled(days, n, f64::NAN);
    let mut cumulative_deaths = Grid::filled(days, n, f64::NAN);
    let mut hospitalizations = Grid::filled(days, n, f64::NAN);
    for (day, district, values) in rows {
        cumulative_cases.set(day, district, values[0]);
        cases.set(day, district, values[1]);
        cumulative_deaths.set(day, district, values[2]);
        hospitalizations.set(day, district, values[3]);
    }
    for day in 0..days {
        for v in 0..n {
            if cumulative_cases.at(day, v).is_nan() {
                return Err(CliError::input(format!(
                    "observed series is missing day {day} for district {}",
                    inputs.table.id(v)
                )));
            }
        }
    }
    Ok(ObservedSeries {
        cumulative_cases,
        cases,
        cumulative_deaths,
        hospitalizations,
    })
}

pub fn calibrate(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    manifest::record(out, config, "calibrate")?;
    let inputs = pipeline::load_inputs(config)?;
    let observed = load_observed(config, &inputs)?;
    let initial = pipeline::load_initial_state(config, &inputs)?;
    let n = inputs.table.len();
    let mut spec = CalibrationSpec::from_populations(
        inputs.table.populations(),
        config.intervals.clone(),
    )?;
    spec.weight_deaths = config.weight_deaths;
    spec.weight_cumulative = config.weight_cumulative;
    spec.weight_cases = config.weight_cases;
    spec.weight_hospital = config.weight_hospital;
    spec.validate()?;

    let base = pipeline::load_epi_params(config, &inputs)?;
    let mut calib = CalibrationConfig::default_for(n);
    calib.budget_per_interval = config.calib_budget;
    calib.restarts = config.calib_restarts;
    calib.seed = config.seed;
    calib.dt = config.dt;
    calib.eta = config.epi_eta;
    calib.theta = config.epi_theta;
    calib.mix_identified = base.beta_identified.clone();
    calib.mix_unidentified = base.beta_unidentified.clone();
    calib.initial_guess = vec![
        1.0,
        1.0,
        config.epi_delta_identified,
        config.epi_delta_unidentified,
        config.epi_gamma_identified,
        config.epi_gamma_unidentified,
        config.epi_gamma_hospital,
        config.epi_mu_identified,
        config.epi_mu_unidentified,
        config.epi_mu_hospital,
    ];

    let outcome = evaluate::calibrate(&initial, &observed, &spec, &calib)?;
    let mut csv = String::new();
    let _ = writeln!(csv, "# seed = {}", config.seed);
    let _ = writeln!(
        csv,
        "interval,days,init_loss,final_loss,evaluations,beta_i_scale,beta_u_scale,delta_i,delta_u,gamma_i,gamma_u,gamma_h,mu_i,mu_u,mu_h"
    );
    for fit in &outcome.intervals {
        let _ = write!(
            csv,
            "{},{},{},{},{}",
            fit.name, fit.days, fit.init_loss, fit.final_loss, fit.evaluations
        );
        for value in &fit.vector {
            let _ = write!(csv, ",{value}");
        }
        let _ = writeln!(csv);
        println!(
            "{}: loss {} -> {} in {} evaluations",
            fit.name, fit.init_loss, fit.final_loss, fit.evaluations
        );
    }
    write_file(&out.join("calibration.csv"), &csv)?;
    Ok(())
}

fn evaluation_csv(report: &evaluate::AvertedReport<f64>, acceptance: bool) -> String {
    let mut out = String::from("n_ci,n_ci_policy,averted,acceptance_adjusted\n");
    let _ = writeln!(
        out,
        "{},{},{},{}",
        report.baseline_cumulative, report.policy_cumulative, report.averted, acceptance
    );
    out
}

pub fn evaluate(
    config: &RunConfig,
    out: &Path,
    plan_path: &Path,
    acceptance: bool,
) -> Result<(), CliError> {
    manifest::record(out, config, "evaluate")?;
    let inputs = pipeline::load_inputs(config)?;
    let model = pipeline::build_model(config, &inputs)?;
    let (plan, _) = solve::import_solution(&model, plan_path)?;
    let params = pipeline::load_epi_params(config, &inputs)?;
    let initial = pipeline::load_initial_state(config, &inputs)?;
    let schedule = pipeline::schedule_from_plan(config, &inputs, &plan, acceptance)?;
    let timeline = vec![(params, config.baseline_days)];
    let report = infections_averted(&timeline, &initial, Some(&schedule), config.dt)?;
    write_file(&out.join("evaluation.csv"), &evaluation_csv(&report, acceptance))?;
    println!(
        "baseline cumulative = {:.2}, with plan = {:.2}, averted = {:.2}",
        report.baseline_cumulative, report.policy_cumulative, report.averted
    );
    Ok(())
}

struct SweepRow {
    lambda: f64,
    lambda_eq: f64,
    travel: f64,
    averted: f64,
    inequity: f64,
}

fn sweep_point(
    config: &RunConfig,
    inputs: &Inputs,
    targets: &[f64],
    lambda: f64,
    lambda_eq: f64,
) -> Result<SweepRow, CliError> {
    let scores = pipeline::load_scores(config, inputs)?;
    let model = vaxsite_core::plan::build_p2(
        &inputs.table,
        &inputs.commuters,
        &inputs.travel,
        &inputs.supply,
        config.k,
        targets,
        &scores,
        lambda,
        lambda_eq,
    )?;
    let report = solve_exhaustive(&model, &limits(config))?;
    let (Some(plan), Some(metrics)) = (&report.plan, &report.metrics) else {
        return Err(CliError::infeasible(format!(
            "sweep point lambda={lambda} lambda_eq={lambda_eq} is infeasible"
        )));
    };
    let params = pipeline::load_epi_params(config, inputs)?;
    let initial = pipeline::load_initial_state(config, inputs)?;
    let schedule = pipeline::schedule_from_plan(config, inputs, plan, false)?;
    let timeline = vec![(params, config.baseline_days)];
    let averted = infections_averted(&timeline, &initial, Some(&schedule), config.dt)?;
    Ok(SweepRow {
        lambda,
        lambda_eq,
        travel: metrics.travel_minutes,
        averted: averted.averted,
        inequity: metrics.inequity,
    })
}

pub fn sweep(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    manifest::record(out, config, "sweep")?;
    let inputs = pipeline::load_inputs(config)?;
    let targets = pipeline::load_targets(config, &inputs)?;

    // Points: the lambda grid at the configured lambda_eq, then the
    // lambda_eq grid at the configured lambda.
    let mut points: Vec<(f64, f64)> = Vec::new();
    for &lambda in &config.lambda_grid {
        points.push((lambda, config.lambda_eq));
    }
    for &lambda_eq in &config.lambda_eq_grid {
        points.push((config.lambda, lambda_eq));
    }
    points.dedup();

    let jobs = config.jobs.max(1);
    let rows: Vec<Result<SweepRow, CliError>> = if jobs == 1 || points.len() <= 1 {
        points
            .iter()
            .map(|&(l, le)| sweep_point(config, &inputs, &targets, l, le))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            points
                .par_iter()
                .map(|&(l, le)| sweep_point(config, &inputs, &targets, l, le))
                .collect()
        })
    };

    let mut csv = String::from("lambda,lambda_eq,travel_minutes,averted,inequity\n");
    let mut collected = Vec::new();
    for row in rows {
        let row = row?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.lambda, row.lambda_eq, row.travel, row.averted, row.inequity
        );
        collected.push(row);
    }
    write_file(&out.join("sweep.csv"), &csv)?;

    // Chart 1: averted vs lambda (the lambda-grid prefix of the rows).
    let lambda_points: Vec<(f64, f64)> = collected
        .iter()
        .take(config.lambda_grid.len())
        .map(|row| (row.lambda, row.averted))
        .collect();
    let chart = svg::line_chart(
        "Infections averted vs lambda",
        "lambda",
        "infections averted",
        &[Series {
            name: "averted".into(),
            color: svg::PALETTE[0],
            points: lambda_points,
        }],
    );
    write_file(&out.join("averted_vs_lambda.svg"), &chart)?;

    // Chart 2: averted and inequity vs lambda_eq.
    let tail = &collected[config.lambda_grid.len()..];
    let averted_points: Vec<(f64, f64)> =
        tail.iter().map(|row| (row.lambda_eq, row.averted)).collect();
    let inequity_points: Vec<(f64, f64)> =
        tail.iter().map(|row| (row.lambda_eq, row.inequity)).collect();
    let chart = svg::line_chart(
        "Averted and inequity vs lambda_eq",
        "lambda_eq",
        "value",
        &[
            Series {
                name: "averted".into(),
                color: svg::PALETTE[0],
                points: averted_points,
            },
            Series {
                name: "inequity".into(),
                color: svg::PALETTE[1],
                points: inequity_points,
            },
        ],
    );
    write_file(&out.join("lambda_eq_tradeoff.svg"), &chart)?;
    println!("swept {} points; sweep.csv and charts written", collected.len());
    Ok(())
}

pub fn report(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    manifest::record(out, config, "report")?;
    let mut body = String::from("# Run report\n\n");
    let _ = writeln!(body, "- config hash: `{:016x}`", config_hash(config));
    for artifact in [
        "build_summary.txt",
        "solve_summary.txt",
        "metrics.csv",
        "evaluation.csv",
        "calibration.csv",
        "sweep.csv",
    ] {
        let path = out.join(artifact);
        if let Ok(contents) = std::fs::read_to_string(&path) {
            let _ = writeln!(body, "\n## {artifact}\n");
            let _ = writeln!(body, "```\n{}```", contents);
        }
    }
    write_file(&out.join("report.md"), &body)?;
    println!("report written to {}", out.join("report.md").display());
    Ok(())
}
