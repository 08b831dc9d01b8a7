use approx::{assert_abs_diff_eq, assert_relative_eq};

use super::*;
use crate::epi::{sir_step, SirParams, SirState};

fn seeded_state(n: usize, pop: f64, exposed: f64) -> EpiState<f64> {
    let mut state = EpiState {
        susceptible: vec![pop - exposed; n],
        vaccinated: vec![0.0; n],
        exposed: vec![exposed; n],
        infectious_identified: vec![0.0; n],
        infectious_unidentified: vec![0.0; n],
        hospitalized: vec![0.0; n],
        recovered: vec![0.0; n],
        dead: vec![0.0; n],
    };
    state.susceptible[0] -= 1.0;
    state.infectious_identified[0] += 1.0;
    state
}

fn busy_params(n: usize) -> EpiParams<f64> {
    let mut params = EpiParams::zeroed(n);
    params.beta_identified = Grid::filled(n, n, 0.22 / n as f64);
    params.beta_unidentified = Grid::filled(n, n, 0.31 / n as f64);
    params.delta_identified = 0.18;
    params.delta_unidentified = 0.09;
    params.gamma_identified = 0.11;
    params.gamma_unidentified = 0.13;
    params.gamma_hospital = 0.07;
    params.mu_identified = 0.004;
    params.mu_unidentified = 0.002;
    params.mu_hospital = 0.02;
    params.eta = 0.03;
    params.theta = 0.01;
    params
}

#[test]
fn zero_rates_keep_state_constant() {
    let params = EpiParams::zeroed(2);
    let initial = seeded_state(2, 1000.0, 5.0);
    let trajectory = simulate(&initial, &params, None, 10, 0.5).unwrap();
    assert_eq!(trajectory.len(), 11);
    assert_eq!(trajectory.last().unwrap(), &initial);
}

#[test]
fn exposed_decay_matches_closed_form() {
    // Only E -> I at rate 0.2: E(t) = 100 exp(-0.2 t).
    let mut params = EpiParams::zeroed(1);
    params.delta_identified = 0.2;
    let mut initial = EpiState::fresh(&[1000]);
    initial.exposed[0] = 100.0;
    initial.susceptible[0] = 900.0;
    let trajectory = simulate(&initial, &params, None, 5, 0.01).unwrap();
    assert_abs_diff_eq!(
        trajectory[5].exposed[0],
        100.0 * (-1.0f64).exp(),
        epsilon = 1e-3
    );
}

#[test]
fn population_conserved_over_300_days() {
    let params = busy_params(3);
    let initial = seeded_state(3, 50_000.0, 40.0);
    let trajectory = simulate(&initial, &params, None, 300, 0.25).unwrap();
    for v in 0..3 {
        let expected = initial.total(v);
        for state in &trajectory {
            assert_relative_eq!(state.total(v), expected, max_relative = 1e-6);
        }
    }
}

#[test]
fn disease_free_population_is_static() {
    let mut params = busy_params(2);
    params.zero_latency = false;
    let initial = EpiState::fresh(&[10_000, 5_000]);
    let trajectory = simulate(&initial, &params, None, 50, 0.5).unwrap();
    assert_eq!(trajectory.last().unwrap().susceptible, initial.susceptible);
}

#[test]
fn vaccination_delivers_planned_doses_with_ample_susceptibles() {
    let params = EpiParams::zeroed(2);
    let initial = EpiState::fresh(&[1_000_000, 500_000]);
    let doses = Grid::from_rows(2, 2, vec![900.0, 400.0, 300.0, 100.0]);
    let schedule = VaccinationSchedule::new(doses, 30, 0).unwrap();
    let trajectory = simulate(&initial, &params, Some(&schedule), 60, 0.25).unwrap();
    let end = trajectory.last().unwrap();
    assert_relative_eq!(end.vaccinated[0], 1200.0, max_relative = 0.01);
    assert_relative_eq!(end.vaccinated[1], 500.0, max_relative = 0.01);
}

#[test]
fn vaccination_never_exceeds_allocated_doses() {
    // Susceptibles bind: only 50 people but 500 planned doses.
    let params = EpiParams::zeroed(1);
    let initial = EpiState::fresh(&[50]);
    let doses = Grid::from_rows(1, 1, vec![500.0]);
    let schedule = VaccinationSchedule::new(doses, 30, 0).unwrap();
    let trajectory = simulate(&initial, &params, Some(&schedule), 40, 0.25).unwrap();
    let end = trajectory.last().unwrap();
    assert!(end.vaccinated[0] <= 50.0 + 1e-6);
    assert!(end.susceptible[0] >= -1e-9);
}

#[test]
fn zero_latency_reduction_matches_sir_integrator() {
    // Cross-module oracle: with the exposure stage bypassed, unidentified /
    // hospital / death pathways zeroed, and vaccination off, the detailed
    // model must follow the simplified SIR trajectory.
    let n = 2;
    let populations = [1_000.0, 2_000.0];
    let beta = Grid::from_rows(2, 2, vec![0.30, 0.08, 0.05, 0.25]);
    let gamma = 0.1;

    let mut detailed = EpiParams::zeroed(n);
    detailed.beta_identified = beta.clone();
    detailed.gamma_identified = gamma;
    detailed.zero_latency = true;

    let i0 = [0.01, 0.002];
    let mut initial = EpiState::fresh(&[1_000, 2_000]);
    for v in 0..n {
        let infected = populations[v] * i0[v];
        initial.susceptible[v] -= infected;
        initial.infectious_identified[v] = infected;
    }

    let sir_params = SirParams::new(beta, gamma, Grid::filled(n, n, 1.0)).unwrap();
    let mut sir = SirState::new(
        (0..n).map(|v| 1.0 - i0[v]).collect(),
        i0.to_vec(),
        vec![0.0; n],
    )
    .unwrap();

    let dt = 0.01;
    let days = 100;
    let trajectory = simulate(&initial, &detailed, None, days, dt).unwrap();
    for day in 1..=days as usize {
        for _ in 0..100 {
            sir = sir_step(&sir, &sir_params, dt).unwrap();
        }
        let state = &trajectory[day];
        for v in 0..n {
            assert_abs_diff_eq!(state.susceptible[v] / populations[v], sir.s[v], epsilon = 1e-6);
            assert_abs_diff_eq!(
                state.infectious_identified[v] / populations[v],
                sir.i[v],
                epsilon = 1e-6
            );
            assert_abs_diff_eq!(state.recovered[v] / populations[v], sir.r[v], epsilon = 1e-6);
        }
    }
}

#[test]
fn loss_zero_on_perfect_fit() {
    let params = busy_params(2);
    let initial = seeded_state(2, 10_000.0, 10.0);
    let trajectory = simulate(&initial, &params, None, 30, 0.25).unwrap();
    let observed = observed_from_trajectory(&trajectory);
    let spec =
        CalibrationSpec::from_populations(&[10_000, 10_000], vec![("all".into(), 30)]).unwrap();
    let loss = calibration_loss(&trajectory, &observed, &spec).unwrap();
    assert_eq!(loss, 0.0);
}

#[test]
fn loss_single_term_arithmetic() {
    // One district, one day, deaths off by 3, everything else exact.
    let state = EpiState::fresh(&[100]);
    let trajectory = vec![state.clone()];
    let mut observed = observed_from_trajectory(&trajectory);
    observed.cumulative_deaths.set(0, 0, 3.0);
    // The cumulative-cases target includes deaths, keep it consistent so
    // only the death term differs.
    observed.cumulative_cases.set(0, 0, 0.0);
    let spec = CalibrationSpec {
        intervals: vec![("one".into(), 1)],
        weight_deaths: 1.0,
        weight_cumulative: 0.0,
        weight_cases: 1.0,
        weight_hospital: 1.0,
        district_weights: vec![1.0],
    };
    let loss = calibration_loss(&trajectory, &observed, &spec).unwrap();
    assert_eq!(loss, 3.0);
}

#[test]
fn loss_linear_in_weights() {
    let params = busy_params(2);
    let initial = seeded_state(2, 10_000.0, 10.0);
    let trajectory = simulate(&initial, &params, None, 20, 0.25).unwrap();
    let shifted = simulate(&seeded_state(2, 10_000.0, 14.0), &params, None, 20, 0.25).unwrap();
    let observed = observed_from_trajectory(&shifted);
    let mut spec =
        CalibrationSpec::from_populations(&[10_000, 10_000], vec![("all".into(), 20)]).unwrap();
    let base = calibration_loss(&trajectory, &observed, &spec).unwrap();
    spec.weight_deaths *= 2.0;
    spec.weight_cumulative *= 2.0;
    spec.weight_cases *= 2.0;
    spec.weight_hospital *= 2.0;
    let doubled = calibration_loss(&trajectory, &observed, &spec).unwrap();
    assert_relative_eq!(doubled, 2.0 * base, max_relative = 1e-12);
}

#[test]
fn loss_invariant_under_district_relabeling() {
    let params = busy_params(2);
    let initial = seeded_state(2, 10_000.0, 10.0);
    let trajectory = simulate(&initial, &params, None, 15, 0.25).unwrap();
    let target = simulate(&seeded_state(2, 10_000.0, 20.0), &params, None, 15, 0.25).unwrap();
    let observed = observed_from_trajectory(&target);
    let spec = CalibrationSpec {
        intervals: vec![("all".into(), 15)],
        weight_deaths: 1.0,
        weight_cumulative: 1.0,
        weight_cases: 1.0,
        weight_hospital: 1.0,
        district_weights: vec![0.3, 0.7],
    };
    let loss = calibration_loss(&trajectory, &observed, &spec).unwrap();

    // Swap the two districts everywhere, including the weights.
    let swap_state = |state: &EpiState<f64>| {
        let mut swapped = state.clone();
        for (a, b) in [
            (&mut swapped.susceptible, &state.susceptible),
            (&mut swapped.vaccinated, &state.vaccinated),
            (&mut swapped.exposed, &state.exposed),
            (&mut swapped.infectious_identified, &state.infectious_identified),
            (
                &mut swapped.infectious_unidentified,
                &state.infectious_unidentified,
            ),
            (&mut swapped.hospitalized, &state.hospitalized),
            (&mut swapped.recovered, &state.recovered),
            (&mut swapped.dead, &state.dead),
        ] {
            a[0] = b[1];
            a[1] = b[0];
        }
        swapped
    };
    let trajectory_swapped: Vec<_> = trajectory.iter().map(swap_state).collect();
    let target_swapped: Vec<_> = target.iter().map(swap_state).collect();
    let observed_swapped = observed_from_trajectory(&target_swapped);
    let spec_swapped = CalibrationSpec {
        district_weights: vec![0.7, 0.3],
        ..spec
    };
    let loss_swapped =
        calibration_loss(&trajectory_swapped, &observed_swapped, &spec_swapped).unwrap();
    assert_abs_diff_eq!(loss, loss_swapped, epsilon = 1e-12);
}

#[test]
fn length_mismatch_rejected() {
    let params = EpiParams::zeroed(1);
    let initial = EpiState::fresh(&[10]);
    let trajectory = simulate(&initial, &params, None, 5, 0.5).unwrap();
    let observed = observed_from_trajectory(&trajectory[..3]);
    let spec = CalibrationSpec::from_populations(&[10], vec![("x".into(), 5)]).unwrap();
    assert!(matches!(
        calibration_loss(&trajectory, &observed, &spec),
        Err(EvalError::LengthMismatch { .. })
    ));
}

#[test]
fn calibration_recovers_synthetic_parameters() {
    // Noiseless data from known piecewise rates (a regime change between
    // the two intervals, lockdown-style); refitting from a scaled initial
    // guess must cut the loss at least a thousandfold per interval.
    let n = 3;
    let truth_early = vec![0.45, 0.0, 0.20, 0.0, 0.12, 0.0, 0.08, 0.01, 0.0, 0.015];
    let truth_late = vec![0.27, 0.0, 0.20, 0.0, 0.144, 0.0, 0.08, 0.01, 0.0, 0.015];
    let mut config = CalibrationConfig::default_for(n);
    config.dt = 0.5;
    config.eta = 0.03;
    let params_early = params_from_vector(&truth_early, &config);
    let params_late = params_from_vector(&truth_late, &config);
    let initial = seeded_state(n as usize, 20_000.0, 30.0);
    let spec = CalibrationSpec::from_populations(
        &[20_000, 20_000, 20_000],
        vec![("early".into(), 30), ("late".into(), 30)],
    )
    .unwrap();
    let trajectory = simulate_timeline(
        &initial,
        &[(params_early, 30), (params_late, 30)],
        None,
        config.dt,
    )
    .unwrap();
    let observed = observed_from_trajectory(&trajectory);

    config.initial_guess = truth_early.iter().map(|p| p * 1.4).collect();
    let outcome = calibrate(&initial, &observed, &spec, &config).unwrap();
    assert_eq!(outcome.intervals.len(), 2);
    for fit in &outcome.intervals {
        assert!(
            fit.final_loss <= 1e-3 * fit.init_loss,
            "interval {} only reached {} from {}",
            fit.name,
            fit.final_loss,
            fit.init_loss
        );
        assert_eq!(fit.evaluations <= 2100, true, "budget respected");
    }
}

#[test]
fn calibration_requires_enough_observations() {
    let n = 2;
    let config = CalibrationConfig::default_for(n);
    let initial = seeded_state(n, 1_000.0, 5.0);
    let spec =
        CalibrationSpec::from_populations(&[1_000, 1_000], vec![("x".into(), 10)]).unwrap();
    let observed = observed_from_trajectory(&[initial.clone()]);
    assert!(matches!(
        calibrate(&initial, &observed, &spec, &config),
        Err(EvalError::InsufficientData { .. })
    ));
}

#[test]
fn calibration_warm_starts_from_previous_interval() {
    let n = 2;
    let truth = vec![0.4, 0.25, 0.15, 0.08, 0.1, 0.09, 0.06, 0.01, 0.01, 0.01];
    let mut config = CalibrationConfig::default_for(n);
    config.dt = 0.5;
    config.budget_per_interval = 400;
    let true_params = params_from_vector(&truth, &config);
    let initial = seeded_state(n, 10_000.0, 20.0);
    let spec = CalibrationSpec::from_populations(
        &[10_000, 10_000],
        vec![("a".into(), 10), ("b".into(), 10)],
    )
    .unwrap();
    let trajectory = simulate(&initial, &true_params, None, 20, config.dt).unwrap();
    let observed = observed_from_trajectory(&trajectory);
    let outcome = calibrate(&initial, &observed, &spec, &config).unwrap();
    // The second interval's declared initialization equals the first
    // interval's fitted vector.
    assert_eq!(outcome.intervals[1].init_vector, outcome.intervals[0].vector);
}

#[test]
fn zero_dose_plan_averts_nothing() {
    let params = busy_params(2);
    let initial = seeded_state(2, 30_000.0, 25.0);
    let timeline = vec![(params, 120u32)];
    let schedule =
        VaccinationSchedule::new(Grid::filled(2, 2, 0.0), 30, 0).unwrap();
    let report = infections_averted(&timeline, &initial, Some(&schedule), 0.25).unwrap();
    assert_eq!(report.averted, 0.0);
    assert_eq!(report.baseline_cumulative, report.policy_cumulative);
}

#[test]
fn doubling_doses_averts_at_least_as_much() {
    let params = busy_params(2);
    let initial = seeded_state(2, 30_000.0, 25.0);
    let timeline = vec![(params, 150u32)];
    let doses = Grid::from_rows(2, 2, vec![800.0, 500.0, 800.0, 500.0]);
    let schedule = VaccinationSchedule::new(doses, 30, 10).unwrap();
    let single = infections_averted(&timeline, &initial, Some(&schedule), 0.25).unwrap();
    let double =
        infections_averted(&timeline, &initial, Some(&schedule.scaled(2.0)), 0.25).unwrap();
    assert!(single.averted > 0.0);
    assert!(double.averted >= single.averted);
}

#[test]
fn halved_acceptance_averts_less() {
    let params = busy_params(2);
    let initial = seeded_state(2, 30_000.0, 25.0);
    let timeline = vec![(params, 150u32)];
    let doses = Grid::from_rows(2, 2, vec![800.0, 500.0, 800.0, 500.0]);
    let schedule = VaccinationSchedule::new(doses, 30, 10).unwrap();
    let full = infections_averted(&timeline, &initial, Some(&schedule), 0.25).unwrap();
    let half =
        infections_averted(&timeline, &initial, Some(&schedule.scaled(0.5)), 0.25).unwrap();
    assert!(half.averted < full.averted);
}
