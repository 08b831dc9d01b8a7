//! Sequential interval calibration via derivative-free search.
//!
//! Each interval minimizes the absolute-error loss over ten scalar rates:
//! two transmission multipliers applied to fixed mixing matrices, the two
//! progression rates, three recovery rates, and three death rates.
//! Intervals are fitted in order, each warm-started from the previous fit,
//! and the state is advanced through the fitted interval before moving on.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::Grid;
use crate::scalar::Scalar;

use super::{
    calibration_loss, simulate, CalibrationSpec, EpiParams, EpiState, EvalError, ObservedSeries,
};

/// Number of calibrated scalars.
pub const PARAM_COUNT: usize = 10;

#[derive(Debug, Clone)]
pub struct NelderMeadOptions<T> {
    pub reflection: T,
    pub expansion: T,
    pub contraction: T,
    pub shrink: T,
    /// Relative spread of function values at which the simplex is converged.
    pub tolerance: T,
    /// Scale factor on the initial simplex edge lengths; polish passes use
    /// small values to refine a near-converged point.
    pub initial_step: T,
}

impl<T: Scalar> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        Self {
            reflection: T::from_f64_c(1.0),
            expansion: T::from_f64_c(2.0),
            contraction: T::from_f64_c(0.5),
            shrink: T::from_f64_c(0.5),
            tolerance: T::from_f64_c(1e-12),
            initial_step: T::one(),
        }
    }
}

impl<T: Scalar> NelderMeadOptions<T> {
    /// Dimension-adaptive coefficients (Gao & Han), which track narrow
    /// valleys better than the textbook constants once the dimension grows.
    pub fn adaptive(dim: usize) -> Self {
        let d = dim.max(2) as f64;
        Self {
            reflection: T::from_f64_c(1.0),
            expansion: T::from_f64_c(1.0 + 2.0 / d),
            contraction: T::from_f64_c(0.75 - 1.0 / (2.0 * d)),
            shrink: T::from_f64_c(1.0 - 1.0 / d),
            tolerance: T::from_f64_c(1e-12),
            initial_step: T::one(),
        }
    }

    pub fn with_step(mut self, initial_step: T) -> Self {
        self.initial_step = initial_step;
        self
    }
}

fn project<T: Scalar>(point: &mut [T], bounds: &[(T, T)]) {
    for (value, &(lo, hi)) in point.iter_mut().zip(bounds) {
        *value = (*value).max(lo).min(hi);
    }
}

/// Box-constrained Nelder-Mead; returns the best point, its value, and the
/// number of function evaluations spent.
pub fn nelder_mead<T: Scalar, F: FnMut(&[T]) -> T>(
    mut objective: F,
    start: &[T],
    bounds: &[(T, T)],
    budget: usize,
    options: &NelderMeadOptions<T>,
) -> (Vec<T>, T, usize) {
    let dim = start.len();
    assert_eq!(bounds.len(), dim);
    let mut evals = 0usize;
    let mut eval = |point: &[T], evals: &mut usize| -> T {
        *evals += 1;
        objective(point)
    };

    // Initial simplex: the start plus one perturbed vertex per coordinate.
    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(dim + 1);
    let mut start = start.to_vec();
    project(&mut start, bounds);
    simplex.push(start.clone());
    for i in 0..dim {
        let mut vertex = start.clone();
        let span = bounds[i].1 - bounds[i].0;
        let step = (vertex[i].abs() * T::from_f64_c(0.10))
            .max(span * T::from_f64_c(0.02))
            .max(T::from_f64_c(1e-4))
            * options.initial_step;
        // Step inward when the upper bound is in the way.
        if vertex[i] + step > bounds[i].1 {
            vertex[i] = vertex[i] - step;
        } else {
            vertex[i] = vertex[i] + step;
        }
        project(&mut vertex, bounds);
        simplex.push(vertex);
    }
    let mut values: Vec<T> = simplex.iter().map(|p| eval(p, &mut evals)).collect();

    while evals < budget {
        // Order the simplex by value.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];
        if (values[worst] - values[best]).abs()
            <= options.tolerance * (T::one() + values[best].abs())
        {
            break;
        }

        let mut centroid = vec![T::zero(); dim];
        for &index in order.iter().take(dim) {
            for (c, &x) in centroid.iter_mut().zip(&simplex[index]) {
                *c += x;
            }
        }
        let inv = T::one() / T::from_count(dim as u64);
        centroid.iter_mut().for_each(|c| *c *= inv);

        let blend = |from: &[T], to: &[T], factor: T| -> Vec<T> {
            let mut point: Vec<T> = from
                .iter()
                .zip(to)
                .map(|(&f, &t)| f + factor * (t - f))
                .collect();
            project(&mut point, bounds);
            point
        };

        // Reflection.
        let reflected = blend(&centroid, &simplex[worst], -options.reflection);
        let reflected_value = eval(&reflected, &mut evals);
        if reflected_value < values[second_worst] && reflected_value >= values[best] {
            simplex[worst] = reflected;
            values[worst] = reflected_value;
            continue;
        }
        // Expansion.
        if reflected_value < values[best] {
            let expanded = blend(&centroid, &reflected, options.expansion);
            let expanded_value = eval(&expanded, &mut evals);
            if expanded_value < reflected_value {
                simplex[worst] = expanded;
                values[worst] = expanded_value;
            } else {
                simplex[worst] = reflected;
                values[worst] = reflected_value;
            }
            continue;
        }
        // Contraction toward the better of worst/reflected.
        let contracted = if reflected_value < values[worst] {
            blend(&centroid, &reflected, options.contraction)
        } else {
            blend(&centroid, &simplex[worst], options.contraction)
        };
        let contracted_value = eval(&contracted, &mut evals);
        if contracted_value < values[worst].min(reflected_value) {
            simplex[worst] = contracted;
            values[worst] = contracted_value;
            continue;
        }
        // Shrink toward the best vertex.
        let best_point = simplex[best].clone();
        for index in 0..=dim {
            if index == best {
                continue;
            }
            let shrunk = blend(&best_point, &simplex[index], options.shrink);
            values[index] = eval(&shrunk, &mut evals);
            simplex[index] = shrunk;
            if evals >= budget {
                break;
            }
        }
    }

    let mut best_index = 0;
    for index in 1..=dim {
        if values[index] < values[best_index] {
            best_index = index;
        }
    }
    (simplex[best_index].clone(), values[best_index], evals)
}

/// Calibration knobs.
#[derive(Debug, Clone)]
pub struct CalibrationConfig<T = f64> {
    /// Function-evaluation budget per interval, shared by all restarts.
    pub budget_per_interval: usize,
    /// Random restarts after the warm-started run.
    pub restarts: usize,
    pub seed: u64,
    /// Box bounds per calibrated scalar.
    pub bounds: Vec<(T, T)>,
    /// Warm start for the first interval.
    pub initial_guess: Vec<T>,
    /// Fixed mixing structure scaled by the identified transmission
    /// multiplier.
    pub mix_identified: Grid<T>,
    /// Same for unidentified transmission.
    pub mix_unidentified: Grid<T>,
    /// Hospitalization rates, which the loss targets cannot identify
    /// separately; kept fixed.
    pub eta: T,
    pub theta: T,
    pub dt: T,
    /// Search in log-rate space. Rates span orders of magnitude, and the
    /// log transform equalizes their step sizes; zero lower bounds are
    /// floored at a negligible rate.
    pub log_space: bool,
}

impl CalibrationConfig<f64> {
    /// Uniform mixing defaults for an `n`-district system.
    pub fn default_for(n: usize) -> Self {
        Self {
            budget_per_interval: 2000,
            restarts: 3,
            seed: 7,
            bounds: vec![(0.0, 2.0); PARAM_COUNT],
            initial_guess: vec![0.2, 0.2, 0.2, 0.2, 0.1, 0.1, 0.1, 0.01, 0.01, 0.01],
            mix_identified: Grid::filled(n, n, 1.0 / n as f64),
            mix_unidentified: Grid::filled(n, n, 1.0 / n as f64),
            eta: 0.0,
            theta: 0.0,
            dt: 0.25,
            log_space: true,
        }
    }
}

/// Smallest rate distinguishable from zero in log-space search.
const LOG_FLOOR: f64 = 1e-5;

/// Expand the ten calibrated scalars into full parameters.
pub fn params_from_vector<T: Scalar>(vector: &[T], config: &CalibrationConfig<T>) -> EpiParams<T> {
    let n = config.mix_identified.rows();
    let scale_grid = |mix: &Grid<T>, factor: T| {
        let mut grid = mix.clone();
        for u in 0..n {
            for v in 0..n {
                grid.set(u, v, mix.at(u, v) * factor);
            }
        }
        grid
    };
    EpiParams {
        beta_identified: scale_grid(&config.mix_identified, vector[0]),
        beta_unidentified: scale_grid(&config.mix_unidentified, vector[1]),
        delta_identified: vector[2],
        delta_unidentified: vector[3],
        gamma_identified: vector[4],
        gamma_unidentified: vector[5],
        gamma_hospital: vector[6],
        mu_identified: vector[7],
        mu_unidentified: vector[8],
        mu_hospital: vector[9],
        eta: config.eta,
        theta: config.theta,
        zero_latency: false,
    }
}

/// One fitted interval.
#[derive(Debug, Clone)]
pub struct IntervalFit<T> {
    pub name: String,
    pub days: u32,
    pub vector: Vec<T>,
    pub params: EpiParams<T>,
    /// Warm-start point the interval search began from.
    pub init_vector: Vec<T>,
    pub init_loss: T,
    pub final_loss: T,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct CalibrationOutcome<T> {
    pub intervals: Vec<IntervalFit<T>>,
    /// State at the end of the fitted horizon.
    pub final_state: EpiState<T>,
}

/// Fit all intervals sequentially against the observed series (which must
/// cover day 0 through the sum of interval lengths).
pub fn calibrate<T: Scalar>(
    initial: &EpiState<T>,
    observed: &ObservedSeries<T>,
    spec: &CalibrationSpec<T>,
    config: &CalibrationConfig<T>,
) -> Result<CalibrationOutcome<T>, EvalError> {
    spec.validate()?;
    if config.bounds.len() != PARAM_COUNT || config.initial_guess.len() != PARAM_COUNT {
        return Err(EvalError::BadSpec(format!(
            "expected {PARAM_COUNT} bounds and initial values"
        )));
    }
    let total_days = spec.total_days() as usize;
    if observed.days() < total_days + 1 {
        return Err(EvalError::InsufficientData {
            reason: format!(
                "need {} daily rows to cover the intervals, found {}",
                total_days + 1,
                observed.days()
            ),
        });
    }
    if observed.n() != initial.n() {
        return Err(EvalError::DimensionMismatch);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = initial.clone();
    let mut warm = config.initial_guess.clone();
    let mut fits = Vec::with_capacity(spec.intervals.len());
    let mut offset = 0usize;

    for (name, days) in &spec.intervals {
        let days = *days;
        let window = observed.slice(offset + 1, offset + 1 + days as usize);
        let state_snapshot = state.clone();
        let floor = T::from_f64_c(LOG_FLOOR);
        let encode = |vector: &[T]| -> Vec<T> {
            if config.log_space {
                vector.iter().map(|&p| p.max(floor).ln()).collect()
            } else {
                vector.to_vec()
            }
        };
        let decode = |point: &[T]| -> Vec<T> {
            if config.log_space {
                point.iter().map(|&x| x.exp()).collect()
            } else {
                point.to_vec()
            }
        };
        let search_bounds: Vec<(T, T)> = if config.log_space {
            config
                .bounds
                .iter()
                .map(|&(lo, hi)| (lo.max(floor).ln(), hi.max(floor).ln()))
                .collect()
        } else {
            config.bounds.clone()
        };
        let mut loss_of = |point: &[T]| -> T {
            let params = params_from_vector(&decode(point), config);
            match simulate(&state_snapshot, &params, None, days, config.dt) {
                Ok(trajectory) => {
                    match calibration_loss(&trajectory[1..], &window, spec) {
                        Ok(loss) if loss.is_finite() => loss,
                        _ => T::infinity(),
                    }
                }
                Err(_) => T::infinity(),
            }
        };

        let warm_point = encode(&warm);
        let init_loss = loss_of(&warm_point);
        if !init_loss.is_finite() {
            return Err(EvalError::OptimizerDiverged);
        }
        // Budget split: a warm-started main run, jittered restarts, and a
        // final polish pass from the best point found.
        let budget = config.budget_per_interval;
        let main_budget = budget * 2 / 5;
        let restart_budget = if config.restarts > 0 {
            (budget / 5) / config.restarts
        } else {
            0
        };
        let options = NelderMeadOptions::adaptive(PARAM_COUNT);
        let mut best_loss = init_loss;
        let mut spent = 1usize;
        let offer = |point: Vec<T>, loss: T, best_point: &mut Vec<T>, best_loss: &mut T| {
            if loss < *best_loss {
                *best_loss = loss;
                *best_point = point;
            }
        };
        let mut best_point = warm_point.clone();
        let (point, loss, evals) = nelder_mead(
            &mut loss_of,
            &warm_point,
            &search_bounds,
            main_budget.max(1),
            &options,
        );
        spent += evals;
        offer(point, loss, &mut best_point, &mut best_loss);
        for _ in 0..config.restarts {
            let start_point: Vec<T> = best_point
                .iter()
                .zip(&search_bounds)
                .map(|(&x, &(lo, hi))| {
                    let span = hi - lo;
                    let jitter = T::from_f64_c(rng.gen_range(-0.08..0.08)) * span;
                    (x + jitter).max(lo).min(hi)
                })
                .collect();
            let (point, loss, evals) = nelder_mead(
                &mut loss_of,
                &start_point,
                &search_bounds,
                restart_budget.max(1),
                &options,
            );
            spent += evals;
            offer(point, loss, &mut best_point, &mut best_loss);
        }
        // Staged polish: fresh simplexes of shrinking size around the
        // incumbent until the budget runs out.
        let mut step_scale = 0.2f64;
        while spent < budget {
            let polish_budget = (budget / 5).min(budget - spent).max(1);
            let polish_start = best_point.clone();
            let polish_options = options.clone().with_step(T::from_f64_c(step_scale));
            let (point, loss, evals) = nelder_mead(
                &mut loss_of,
                &polish_start,
                &search_bounds,
                polish_budget,
                &polish_options,
            );
            spent += evals.max(1);
            offer(point, loss, &mut best_point, &mut best_loss);
            step_scale = (step_scale * 0.25).max(1e-6);
        }
        if !best_loss.is_finite() {
            return Err(EvalError::OptimizerDiverged);
        }

        let best_vector = decode(&best_point);
        let params = params_from_vector(&best_vector, config);
        let trajectory = simulate(&state, &params, None, days, config.dt)?;
        state = trajectory.last().expect("non-empty trajectory").clone();
        fits.push(IntervalFit {
            name: name.clone(),
            days,
            vector: best_vector.clone(),
            params,
            init_vector: warm.clone(),
            init_loss,
            final_loss: best_loss,
            evaluations: spent,
        });
        warm = best_vector;
        offset += days as usize;
    }

    Ok(CalibrationOutcome {
        intervals: fits,
        final_state: state,
    })
}
