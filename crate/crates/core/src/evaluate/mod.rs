//! The detailed eight-compartment epidemic model used to evaluate plans:
//! susceptible, vaccinated, exposed, identified and unidentified
//! infectious, hospitalized, recovered, dead. Includes the calibration
//! loss, the sequential interval calibrator, and infections-averted
//! accounting.

mod calibrate;

pub use calibrate::{
    calibrate, nelder_mead, params_from_vector, CalibrationConfig, CalibrationOutcome,
    IntervalFit, NelderMeadOptions,
};

use thiserror::Error;

use crate::grid::Grid;
use crate::plan::AllocationPlan;
use crate::scalar::Scalar;
use crate::travel::AcceptanceModel;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("all rates must be nonnegative ({0})")]
    NegativeRate(&'static str),
    #[error("state dimensions disagree")]
    DimensionMismatch,
    #[error("state left the valid range: {compartment}[{district}] = {value}")]
    StateOutOfRange {
        compartment: &'static str,
        district: usize,
        value: f64,
    },
    #[error("state became non-finite at day {day}")]
    NonFiniteState { day: u32 },
    #[error("dt must divide one day")]
    BadStep,
    #[error("trajectory and observations have different lengths ({trajectory} vs {observed})")]
    LengthMismatch { trajectory: usize, observed: usize },
    #[error("observed series too short: {reason}")]
    InsufficientData { reason: String },
    #[error("calibration weights invalid: {0}")]
    BadSpec(String),
    #[error("optimizer diverged: non-finite loss")]
    OptimizerDiverged,
}

/// Piecewise-constant rates of the compartmental model. Transmission varies
/// by district pair; progression, recovery, death, and hospitalization
/// rates are geography-invariant.
#[derive(Debug, Clone)]
pub struct EpiParams<T = f64> {
    /// Transmission from identified infectious in `u` onto susceptibles of `v`.
    pub beta_identified: Grid<T>,
    /// Transmission from unidentified infectious.
    pub beta_unidentified: Grid<T>,
    /// Progression E -> I.
    pub delta_identified: T,
    /// Progression E -> U.
    pub delta_unidentified: T,
    pub gamma_identified: T,
    pub gamma_unidentified: T,
    pub gamma_hospital: T,
    pub mu_identified: T,
    pub mu_unidentified: T,
    pub mu_hospital: T,
    /// Hospitalization I -> H.
    pub eta: T,
    /// Hospitalization U -> H.
    pub theta: T,
    /// Route new infections straight into the identified-infectious
    /// compartment (zero incubation). This removes the exposure stage from
    /// the chain, collapsing the dynamics onto the simplified SIR model for
    /// consistency checks.
    pub zero_latency: bool,
}

impl<T: Scalar> EpiParams<T> {
    /// All-zero rates for `n` districts.
    pub fn zeroed(n: usize) -> Self {
        Self {
            beta_identified: Grid::filled(n, n, T::zero()),
            beta_unidentified: Grid::filled(n, n, T::zero()),
            delta_identified: T::zero(),
            delta_unidentified: T::zero(),
            gamma_identified: T::zero(),
            gamma_unidentified: T::zero(),
            gamma_hospital: T::zero(),
            mu_identified: T::zero(),
            mu_unidentified: T::zero(),
            mu_hospital: T::zero(),
            eta: T::zero(),
            theta: T::zero(),
            zero_latency: false,
        }
    }

    pub fn n(&self) -> usize {
        self.beta_identified.rows()
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let nonneg_grid = |g: &Grid<T>| g.raw().iter().all(|&x| x >= T::zero());
        if !nonneg_grid(&self.beta_identified) {
            return Err(EvalError::NegativeRate("beta_identified"));
        }
        if !nonneg_grid(&self.beta_unidentified) {
            return Err(EvalError::NegativeRate("beta_unidentified"));
        }
        for (name, rate) in [
            ("delta_identified", self.delta_identified),
            ("delta_unidentified", self.delta_unidentified),
            ("gamma_identified", self.gamma_identified),
            ("gamma_unidentified", self.gamma_unidentified),
            ("gamma_hospital", self.gamma_hospital),
            ("mu_identified", self.mu_identified),
            ("mu_unidentified", self.mu_unidentified),
            ("mu_hospital", self.mu_hospital),
            ("eta", self.eta),
            ("theta", self.theta),
        ] {
            if !(rate >= T::zero()) {
                return Err(EvalError::NegativeRate(name));
            }
        }
        Ok(())
    }
}

/// Compartment occupancies in persons, one entry per district.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiState<T = f64> {
    pub susceptible: Vec<T>,
    pub vaccinated: Vec<T>,
    pub exposed: Vec<T>,
    pub infectious_identified: Vec<T>,
    pub infectious_unidentified: Vec<T>,
    pub hospitalized: Vec<T>,
    pub recovered: Vec<T>,
    pub dead: Vec<T>,
}

impl<T: Scalar> EpiState<T> {
    /// Wholly susceptible population.
    pub fn fresh(populations: &[u64]) -> Self {
        let n = populations.len();
        Self {
            susceptible: populations.iter().map(|&p| T::from_count(p)).collect(),
            vaccinated: vec![T::zero(); n],
            exposed: vec![T::zero(); n],
            infectious_identified: vec![T::zero(); n],
            infectious_unidentified: vec![T::zero(); n],
            hospitalized: vec![T::zero(); n],
            recovered: vec![T::zero(); n],
            dead: vec![T::zero(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.susceptible.len()
    }

    /// Living persons in district `v` (everything but the dead).
    pub fn living(&self, v: usize) -> T {
        self.susceptible[v]
            + self.vaccinated[v]
            + self.exposed[v]
            + self.infectious_identified[v]
            + self.infectious_unidentified[v]
            + self.hospitalized[v]
            + self.recovered[v]
    }

    /// Closed-population total of district `v`, including the dead.
    pub fn total(&self, v: usize) -> T {
        self.living(v) + self.dead[v]
    }

    /// Identified cumulative infections of district `v`:
    /// dead + hospitalized + recovered + identified infectious.
    pub fn identified_cumulative(&self, v: usize) -> T {
        self.dead[v] + self.hospitalized[v] + self.recovered[v] + self.infectious_identified[v]
    }

    fn compartments(&self) -> [(&'static str, &Vec<T>); 8] {
        [
            ("S", &self.susceptible),
            ("V", &self.vaccinated),
            ("E", &self.exposed),
            ("I", &self.infectious_identified),
            ("U", &self.infectious_unidentified),
            ("H", &self.hospitalized),
            ("R", &self.recovered),
            ("D", &self.dead),
        ]
    }

    fn check(&self, day: u32, scale: T) -> Result<(), EvalError> {
        let tolerance = T::from_f64_c(1e-9) * scale.max(T::one());
        for (name, values) in self.compartments() {
            for (district, &value) in values.iter().enumerate() {
                if !value.is_finite() {
                    return Err(EvalError::NonFiniteState { day });
                }
                if value < -tolerance {
                    return Err(EvalError::StateOutOfRange {
                        compartment: name,
                        district,
                        value: value.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(())
    }

    fn zero_like(&self) -> Self {
        let n = self.n();
        Self {
            susceptible: vec![T::zero(); n],
            vaccinated: vec![T::zero(); n],
            exposed: vec![T::zero(); n],
            infectious_identified: vec![T::zero(); n],
            infectious_unidentified: vec![T::zero(); n],
            hospitalized: vec![T::zero(); n],
            recovered: vec![T::zero(); n],
            dead: vec![T::zero(); n],
        }
    }

    fn add_scaled(&self, other: &Self, factor: T) -> Self {
        let comb = |a: &[T], b: &[T]| -> Vec<T> {
            a.iter().zip(b).map(|(&x, &y)| x + factor * y).collect()
        };
        Self {
            susceptible: comb(&self.susceptible, &other.susceptible),
            vaccinated: comb(&self.vaccinated, &other.vaccinated),
            exposed: comb(&self.exposed, &other.exposed),
            infectious_identified: comb(
                &self.infectious_identified,
                &other.infectious_identified,
            ),
            infectious_unidentified: comb(
                &self.infectious_unidentified,
                &other.infectious_unidentified,
            ),
            hospitalized: comb(&self.hospitalized, &other.hospitalized),
            recovered: comb(&self.recovered, &other.recovered),
            dead: comb(&self.dead, &other.dead),
        }
    }
}

/// Planned effective doses per decision period and district, with the rate
/// recomputed each step from the current susceptible pool and clamped so
/// cumulative vaccinations never exceed cumulative allocations.
#[derive(Debug, Clone)]
pub struct VaccinationSchedule<T = f64> {
    doses: Grid<T>,
    period_days: u32,
    start_day: u32,
}

impl<T: Scalar> VaccinationSchedule<T> {
    pub fn new(doses: Grid<T>, period_days: u32, start_day: u32) -> Result<Self, EvalError> {
        if doses.raw().iter().any(|&d| d < T::zero()) {
            return Err(EvalError::NegativeRate("doses"));
        }
        if period_days == 0 {
            return Err(EvalError::BadStep);
        }
        Ok(Self {
            doses,
            period_days,
            start_day,
        })
    }

    /// Effective doses from a plan; with an acceptance model, each flow is
    /// scaled by its show-up likelihood.
    pub fn from_plan(
        plan: &AllocationPlan,
        acceptance: Option<&AcceptanceModel<T>>,
        period_days: u32,
        start_day: u32,
    ) -> Result<Self, EvalError> {
        let n = plan.n;
        let mut doses = Grid::filled(plan.horizon, n, T::zero());
        for t in 0..plan.horizon {
            for u in 0..n {
                let mut effective = T::zero();
                for w in 0..n {
                    let count = plan.y_at(t, u, w);
                    if count > 0 {
                        let weight = match acceptance {
                            // Non-commuters vaccinate from home: v = u.
                            Some(model) => model
                                .likelihood(u, u, w)
                                .map_err(|_| EvalError::DimensionMismatch)?,
                            None => T::one(),
                        };
                        effective += T::from_count(count) * weight;
                    }
                }
                if plan.has_commuters() {
                    for v in 0..n {
                        for w in 0..n {
                            let count = plan.z_at(t, u, v, w);
                            if count > 0 {
                                let weight = match acceptance {
                                    Some(model) => model
                                        .likelihood(u, v, w)
                                        .map_err(|_| EvalError::DimensionMismatch)?,
                                    None => T::one(),
                                };
                                effective += T::from_count(count) * weight;
                            }
                        }
                    }
                }
                doses.set(t, u, effective);
            }
        }
        Self::new(doses, period_days, start_day)
    }

    pub fn n(&self) -> usize {
        self.doses.cols()
    }

    pub fn periods(&self) -> usize {
        self.doses.rows()
    }

    pub fn total_doses(&self) -> T {
        self.doses.raw().iter().copied().fold(T::zero(), |a, b| a + b)
    }

    /// Scale every cell (used to halve or double schedules in analyses).
    pub fn scaled(&self, factor: T) -> Self {
        let mut doses = self.doses.clone();
        for t in 0..doses.rows() {
            for v in 0..doses.cols() {
                doses.set(t, v, doses.at(t, v) * factor);
            }
        }
        Self {
            doses,
            period_days: self.period_days,
            start_day: self.start_day,
        }
    }

    /// Step-constant vaccination rate for district `v` at `day`, given the
    /// current susceptibles and doses already delivered.
    fn rate(&self, day: u32, v: usize, susceptible: T, delivered: T, dt: T) -> T {
        if day < self.start_day {
            return T::zero();
        }
        let elapsed = day - self.start_day;
        let period = (elapsed / self.period_days) as usize;
        if period >= self.periods() {
            return T::zero();
        }
        let floor = T::from_f64_c(1e-9);
        if susceptible <= floor {
            return T::zero();
        }
        let mut allowed = T::zero();
        for t in 0..=period {
            allowed += self.doses.at(t, v);
        }
        let remaining = allowed - delivered;
        if remaining <= T::zero() {
            return T::zero();
        }
        let period_length = T::from_count(self.period_days as u64);
        let base = self.doses.at(period, v) / (period_length * susceptible);
        let cap = remaining / (dt * susceptible);
        base.min(cap)
    }
}

fn rhs<T: Scalar>(state: &EpiState<T>, params: &EpiParams<T>, xi: &[T]) -> EpiState<T> {
    let n = state.n();
    let mut out = state.zero_like();
    // Infectious pressure per source district, normalized by its living
    // population.
    let mut pressure_i = vec![T::zero(); n];
    let mut pressure_u = vec![T::zero(); n];
    for u in 0..n {
        let living = state.living(u);
        if living > T::zero() {
            pressure_i[u] = state.infectious_identified[u] / living;
            pressure_u[u] = state.infectious_unidentified[u] / living;
        }
    }
    for v in 0..n {
        let mut force = T::zero();
        for u in 0..n {
            force += params.beta_identified.at(u, v) * pressure_i[u]
                + params.beta_unidentified.at(u, v) * pressure_u[u];
        }
        force = force * state.susceptible[v];
        let vaccination = xi[v] * state.susceptible[v];
        let exposed_out =
            (params.delta_identified + params.delta_unidentified) * state.exposed[v];
        let identified_out = (params.gamma_identified + params.mu_identified + params.eta)
            * state.infectious_identified[v];
        let unidentified_out = (params.gamma_unidentified + params.mu_unidentified + params.theta)
            * state.infectious_unidentified[v];
        let hospital_out =
            (params.gamma_hospital + params.mu_hospital) * state.hospitalized[v];

        out.susceptible[v] = -force - vaccination;
        out.vaccinated[v] = vaccination;
        if params.zero_latency {
            out.exposed[v] = -exposed_out;
            out.infectious_identified[v] =
                force + params.delta_identified * state.exposed[v] - identified_out;
        } else {
            out.exposed[v] = force - exposed_out;
            out.infectious_identified[v] =
                params.delta_identified * state.exposed[v] - identified_out;
        }
        out.infectious_unidentified[v] =
            params.delta_unidentified * state.exposed[v] - unidentified_out;
        out.hospitalized[v] = params.eta * state.infectious_identified[v]
            + params.theta * state.infectious_unidentified[v]
            - hospital_out;
        out.recovered[v] = params.gamma_identified * state.infectious_identified[v]
            + params.gamma_unidentified * state.infectious_unidentified[v]
            + params.gamma_hospital * state.hospitalized[v];
        out.dead[v] = params.mu_identified * state.infectious_identified[v]
            + params.mu_unidentified * state.infectious_unidentified[v]
            + params.mu_hospital * state.hospitalized[v];
    }
    out
}

fn rk4_step<T: Scalar>(state: &EpiState<T>, params: &EpiParams<T>, xi: &[T], dt: T) -> EpiState<T> {
    let half = dt / T::from_f64_c(2.0);
    let k1 = rhs(state, params, xi);
    let k2 = rhs(&state.add_scaled(&k1, half), params, xi);
    let k3 = rhs(&state.add_scaled(&k2, half), params, xi);
    let k4 = rhs(&state.add_scaled(&k3, dt), params, xi);
    let sixth = dt / T::from_f64_c(6.0);
    let two = T::from_f64_c(2.0);
    let combine = |s: &Vec<T>, a: &Vec<T>, b: &Vec<T>, c: &Vec<T>, d: &Vec<T>| -> Vec<T> {
        s.iter()
            .enumerate()
            .map(|(v, &x)| x + sixth * (a[v] + two * b[v] + two * c[v] + d[v]))
            .collect()
    };
    EpiState {
        susceptible: combine(&state.susceptible, &k1.susceptible, &k2.susceptible, &k3.susceptible, &k4.susceptible),
        vaccinated: combine(&state.vaccinated, &k1.vaccinated, &k2.vaccinated, &k3.vaccinated, &k4.vaccinated),
        exposed: combine(&state.exposed, &k1.exposed, &k2.exposed, &k3.exposed, &k4.exposed),
        infectious_identified: combine(
            &state.infectious_identified,
            &k1.infectious_identified,
            &k2.infectious_identified,
            &k3.infectious_identified,
            &k4.infectious_identified,
        ),
        infectious_unidentified: combine(
            &state.infectious_unidentified,
            &k1.infectious_unidentified,
            &k2.infectious_unidentified,
            &k3.infectious_unidentified,
            &k4.infectious_unidentified,
        ),
        hospitalized: combine(&state.hospitalized, &k1.hospitalized, &k2.hospitalized, &k3.hospitalized, &k4.hospitalized),
        recovered: combine(&state.recovered, &k1.recovered, &k2.recovered, &k3.recovered, &k4.recovered),
        dead: combine(&state.dead, &k1.dead, &k2.dead, &k3.dead, &k4.dead),
    }
}

fn steps_per_day<T: Scalar>(dt: T) -> Result<u32, EvalError> {
    if !(dt > T::zero()) {
        return Err(EvalError::BadStep);
    }
    let inverse = (T::one() / dt).to_f64().ok_or(EvalError::BadStep)?;
    let steps = inverse.round();
    if steps < 1.0 || (inverse - steps).abs() > 1e-6 {
        return Err(EvalError::BadStep);
    }
    Ok(steps as u32)
}

/// Integrate the model for `days` days with daily snapshots (the returned
/// trajectory has `days + 1` entries, the first being the initial state).
pub fn simulate<T: Scalar>(
    initial: &EpiState<T>,
    params: &EpiParams<T>,
    schedule: Option<&VaccinationSchedule<T>>,
    days: u32,
    dt: T,
) -> Result<Vec<EpiState<T>>, EvalError> {
    simulate_timeline(initial, &[(params.clone(), days)], schedule, dt)
}

/// Integrate over piecewise-constant parameter intervals; day counting is
/// global, so the vaccination schedule's start offset refers to the whole
/// run.
pub fn simulate_timeline<T: Scalar>(
    initial: &EpiState<T>,
    timeline: &[(EpiParams<T>, u32)],
    schedule: Option<&VaccinationSchedule<T>>,
    dt: T,
) -> Result<Vec<EpiState<T>>, EvalError> {
    let n = initial.n();
    for (params, _) in timeline {
        params.validate()?;
        if params.n() != n {
            return Err(EvalError::DimensionMismatch);
        }
    }
    if let Some(schedule) = schedule {
        if schedule.n() != n {
            return Err(EvalError::DimensionMismatch);
        }
    }
    let steps = steps_per_day(dt)?;
    let scale = (0..n)
        .map(|v| initial.total(v))
        .fold(T::zero(), |a, b| a.max(b));
    let start_vaccinated = initial.vaccinated.clone();

    let total_days: u32 = timeline.iter().map(|&(_, days)| days).sum();
    let mut trajectory = Vec::with_capacity(total_days as usize + 1);
    let mut state = initial.clone();
    state.check(0, scale)?;
    trajectory.push(state.clone());

    let mut day = 0u32;
    let mut xi = vec![T::zero(); n];
    for (params, interval_days) in timeline {
        for _ in 0..*interval_days {
            for step in 0..steps {
                match schedule {
                    Some(schedule) => {
                        for v in 0..n {
                            let delivered = state.vaccinated[v] - start_vaccinated[v];
                            xi[v] =
                                schedule.rate(day, v, state.susceptible[v], delivered, dt);
                        }
                    }
                    None => xi.iter_mut().for_each(|x| *x = T::zero()),
                }
                state = rk4_step(&state, params, &xi, dt);
                let _ = step;
            }
            day += 1;
            state.check(day, scale)?;
            trajectory.push(state.clone());
        }
    }
    Ok(trajectory)
}

/// Daily observations per district used as calibration targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries<T = f64> {
    /// Cumulative identified cases.
    pub cumulative_cases: Grid<T>,
    /// Identified infectious at each day.
    pub cases: Grid<T>,
    /// Cumulative deaths.
    pub cumulative_deaths: Grid<T>,
    /// Hospital occupancy.
    pub hospitalizations: Grid<T>,
}

impl<T: Scalar> ObservedSeries<T> {
    pub fn days(&self) -> usize {
        self.cumulative_cases.rows()
    }

    pub fn n(&self) -> usize {
        self.cumulative_cases.cols()
    }

    /// Row-slice `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Self {
        let carve = |g: &Grid<T>| {
            let mut data = Vec::with_capacity((to - from) * g.cols());
            for row in from..to {
                data.extend_from_slice(g.row(row));
            }
            Grid::from_rows(to - from, g.cols(), data)
        };
        Self {
            cumulative_cases: carve(&self.cumulative_cases),
            cases: carve(&self.cases),
            cumulative_deaths: carve(&self.cumulative_deaths),
            hospitalizations: carve(&self.hospitalizations),
        }
    }
}

/// Read the calibration observables off a simulated trajectory.
pub fn observed_from_trajectory<T: Scalar>(trajectory: &[EpiState<T>]) -> ObservedSeries<T> {
    let days = trajectory.len();
    let n = trajectory.first().map(|s| s.n()).unwrap_or(0);
    let mut cumulative_cases = Grid::filled(days, n, T::zero());
    let mut cases = Grid::filled(days, n, T::zero());
    let mut cumulative_deaths = Grid::filled(days, n, T::zero());
    let mut hospitalizations = Grid::filled(days, n, T::zero());
    for (day, state) in trajectory.iter().enumerate() {
        for v in 0..n {
            cumulative_cases.set(day, v, state.identified_cumulative(v));
            cases.set(day, v, state.infectious_identified[v]);
            cumulative_deaths.set(day, v, state.dead[v]);
            hospitalizations.set(day, v, state.hospitalized[v]);
        }
    }
    ObservedSeries {
        cumulative_cases,
        cases,
        cumulative_deaths,
        hospitalizations,
    }
}

/// Calibration intervals and loss weights.
#[derive(Debug, Clone)]
pub struct CalibrationSpec<T = f64> {
    /// Named intervals with their lengths in days.
    pub intervals: Vec<(String, u32)>,
    pub weight_deaths: T,
    pub weight_cumulative: T,
    pub weight_cases: T,
    pub weight_hospital: T,
    /// Population-share weight per district; sums to one.
    pub district_weights: Vec<T>,
}

impl<T: Scalar> CalibrationSpec<T> {
    /// The default five intervals covering 300 days.
    pub fn default_intervals() -> Vec<(String, u32)> {
        vec![
            ("lockdown".into(), 45),
            ("social".into(), 45),
            ("reopen".into(), 45),
            ("second_wave".into(), 75),
            ("holiday".into(), 90),
        ]
    }

    /// Equal loss weights and population-share district weights.
    pub fn from_populations(
        populations: &[u64],
        intervals: Vec<(String, u32)>,
    ) -> Result<Self, EvalError> {
        let total: u64 = populations.iter().sum();
        if total == 0 {
            return Err(EvalError::BadSpec("zero total population".into()));
        }
        let total = T::from_count(total);
        let spec = Self {
            intervals,
            weight_deaths: T::one(),
            weight_cumulative: T::one(),
            weight_cases: T::one(),
            weight_hospital: T::one(),
            district_weights: populations
                .iter()
                .map(|&p| T::from_count(p) / total)
                .collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.intervals.iter().any(|&(_, days)| days == 0) {
            return Err(EvalError::BadSpec("interval of zero days".into()));
        }
        for (name, weight) in [
            ("deaths", self.weight_deaths),
            ("cumulative", self.weight_cumulative),
            ("cases", self.weight_cases),
            ("hospital", self.weight_hospital),
        ] {
            if !(weight >= T::zero()) {
                return Err(EvalError::BadSpec(format!("negative weight {name}")));
            }
        }
        let total: T = self.district_weights.iter().copied().sum();
        if (total - T::one()).abs() > T::from_f64_c(1e-9) {
            return Err(EvalError::BadSpec(
                "district weights must sum to one".into(),
            ));
        }
        Ok(())
    }

    pub fn total_days(&self) -> u32 {
        self.intervals.iter().map(|&(_, days)| days).sum()
    }
}

/// Weighted absolute-error calibration loss over aligned daily series.
pub fn calibration_loss<T: Scalar>(
    trajectory: &[EpiState<T>],
    observed: &ObservedSeries<T>,
    spec: &CalibrationSpec<T>,
) -> Result<T, EvalError> {
    if trajectory.len() != observed.days() {
        return Err(EvalError::LengthMismatch {
            trajectory: trajectory.len(),
            observed: observed.days(),
        });
    }
    let n = observed.n();
    if trajectory.first().map(|s| s.n()).unwrap_or(n) != n
        || spec.district_weights.len() != n
    {
        return Err(EvalError::DimensionMismatch);
    }
    let mut deaths = T::zero();
    let mut cumulative = T::zero();
    let mut cases = T::zero();
    let mut hospital = T::zero();
    for (day, state) in trajectory.iter().enumerate() {
        for u in 0..n {
            let weight = spec.district_weights[u];
            deaths += weight * (state.dead[u] - observed.cumulative_deaths.at(day, u)).abs();
            cumulative += weight
                * (state.identified_cumulative(u) - observed.cumulative_cases.at(day, u)).abs();
            cases +=
                weight * (state.infectious_identified[u] - observed.cases.at(day, u)).abs();
            hospital +=
                weight * (state.hospitalized[u] - observed.hospitalizations.at(day, u)).abs();
        }
    }
    Ok(spec.weight_deaths * deaths
        + spec.weight_cumulative * cumulative
        + spec.weight_cases * cases
        + spec.weight_hospital * hospital)
}

/// Outcome of the infections-averted comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct AvertedReport<T> {
    /// Cumulative identified infections with no vaccination.
    pub baseline_cumulative: T,
    /// Same with the plan's vaccination schedule.
    pub policy_cumulative: T,
    pub averted: T,
}

/// Run the model with and without the vaccination schedule and compare
/// cumulative identified infections at the end of the window.
pub fn infections_averted<T: Scalar>(
    timeline: &[(EpiParams<T>, u32)],
    initial: &EpiState<T>,
    schedule: Option<&VaccinationSchedule<T>>,
    dt: T,
) -> Result<AvertedReport<T>, EvalError> {
    let baseline = simulate_timeline(initial, timeline, None, dt)?;
    let policy = simulate_timeline(initial, timeline, schedule, dt)?;
    let total = |trajectory: &[EpiState<T>]| {
        let last = trajectory.last().expect("non-empty trajectory");
        (0..last.n())
            .map(|v| last.identified_cumulative(v))
            .fold(T::zero(), |a, b| a + b)
    };
    let baseline_cumulative = total(&baseline);
    let policy_cumulative = total(&policy);
    Ok(AvertedReport {
        baseline_cumulative,
        policy_cumulative,
        averted: baseline_cumulative - policy_cumulative,
    })
}

#[cfg(test)]
mod tests;
