//! Simplified multi-district SIR dynamics and the derived planning inputs:
//! herd-immunity vaccination targets, prevalence-ratio constants, and the
//! decayed prioritization score schedule.

use thiserror::Error;

use crate::grid::Grid;
use crate::ingest::CommuterMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EpiError {
    #[error("transmission matrix must be nonnegative")]
    NegativeBeta,
    #[error("clearance rate must be positive")]
    BadGamma,
    #[error("prevalence-ratio matrix inconsistent at ({u},{v}): {reason}")]
    BadKappa { u: usize, v: usize, reason: String },
    #[error("state component out of range after step: {compartment}[{district}] = {value}")]
    StateOutOfRange {
        compartment: &'static str,
        district: usize,
        value: f64,
    },
    #[error("force of infection degenerate at district {0} (sum of beta*kappa is zero)")]
    DegenerateForce(usize),
    #[error("prevalence must be positive at every district; district {0} is not")]
    ZeroPrevalence(usize),
    #[error("total commuter flow is zero")]
    ZeroFlow,
    #[error("decay must lie in (0, 1], got {0}")]
    BadDecay(f64),
    #[error("state vectors must all have length {expected}")]
    DimensionMismatch { expected: usize },
}

const KAPPA_TOL: f64 = 1e-9;
const STATE_TOL: f64 = 1e-9;

/// Rates of the district-stratified SIR system: `beta[u][v]` transmits from
/// `u`'s infectious onto `v`'s susceptibles, `gamma` clears everywhere, and
/// `kappa[u][v]` is the assumed time-invariant prevalence ratio `i_u / i_v`.
#[derive(Debug, Clone)]
pub struct SirParams<T = f64> {
    beta: Grid<T>,
    gamma: T,
    kappa: Grid<T>,
}

impl<T: Scalar> SirParams<T> {
    pub fn new(beta: Grid<T>, gamma: T, kappa: Grid<T>) -> Result<Self, EpiError> {
        let n = beta.rows();
        assert_eq!(beta.cols(), n);
        assert_eq!(kappa.rows(), n);
        assert_eq!(kappa.cols(), n);
        if beta.raw().iter().any(|&b| b < T::zero()) {
            return Err(EpiError::NegativeBeta);
        }
        if !(gamma > T::zero()) {
            return Err(EpiError::BadGamma);
        }
        let tol = T::from_f64_c(KAPPA_TOL);
        for u in 0..n {
            for v in 0..n {
                let k = kappa.at(u, v);
                if !(k > T::zero()) {
                    return Err(EpiError::BadKappa {
                        u,
                        v,
                        reason: "ratio must be positive".into(),
                    });
                }
                if u == v && (k - T::one()).abs() > tol {
                    return Err(EpiError::BadKappa {
                        u,
                        v,
                        reason: "diagonal must be 1".into(),
                    });
                }
                if (k * kappa.at(v, u) - T::one()).abs() > tol {
                    return Err(EpiError::BadKappa {
                        u,
                        v,
                        reason: "reciprocal identity violated".into(),
                    });
                }
                for x in 0..n {
                    if (k - kappa.at(u, x) * kappa.at(x, v)).abs() > tol {
                        return Err(EpiError::BadKappa {
                            u,
                            v,
                            reason: format!("chain consistency via {x} violated"),
                        });
                    }
                }
            }
        }
        Ok(Self { beta, gamma, kappa })
    }

    /// Single-district shorthand.
    pub fn scalar(beta: T, gamma: T) -> Result<Self, EpiError> {
        Self::new(
            Grid::from_rows(1, 1, vec![beta]),
            gamma,
            Grid::from_rows(1, 1, vec![T::one()]),
        )
    }

    pub fn n(&self) -> usize {
        self.beta.rows()
    }

    pub fn beta(&self) -> &Grid<T> {
        &self.beta
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn kappa(&self) -> &Grid<T> {
        &self.kappa
    }
}

/// Proportions of each district in the susceptible, infectious, and
/// recovered states; each district sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SirState<T = f64> {
    pub s: Vec<T>,
    pub i: Vec<T>,
    pub r: Vec<T>,
}

impl<T: Scalar> SirState<T> {
    pub fn new(s: Vec<T>, i: Vec<T>, r: Vec<T>) -> Result<Self, EpiError> {
        let n = s.len();
        if i.len() != n || r.len() != n {
            return Err(EpiError::DimensionMismatch { expected: n });
        }
        let state = Self { s, i, r };
        state.check()?;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    fn check(&self) -> Result<(), EpiError> {
        let tol = T::from_f64_c(STATE_TOL);
        for v in 0..self.n() {
            for (name, value) in [("s", self.s[v]), ("i", self.i[v]), ("r", self.r[v])] {
                if value < -tol || value > T::one() + tol {
                    return Err(EpiError::StateOutOfRange {
                        compartment: name,
                        district: v,
                        value: value.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
            let total = self.s[v] + self.i[v] + self.r[v];
            if (total - T::one()).abs() > tol {
                return Err(EpiError::StateOutOfRange {
                    compartment: "s+i+r",
                    district: v,
                    value: total.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }
}

fn sir_rhs<T: Scalar>(state: &SirState<T>, params: &SirParams<T>) -> SirState<T> {
    let n = state.n();
    let mut ds = vec![T::zero(); n];
    let mut di = vec![T::zero(); n];
    let mut dr = vec![T::zero(); n];
    for v in 0..n {
        let mut force = T::zero();
        for u in 0..n {
            force += params.beta.at(u, v) * state.i[u];
        }
        let new_infections = force * state.s[v];
        let clearances = params.gamma * state.i[v];
        ds[v] = -new_infections;
        di[v] = new_infections - clearances;
        dr[v] = clearances;
    }
    SirState {
        s: ds,
        i: di,
        r: dr,
    }
}

fn axpy<T: Scalar>(state: &SirState<T>, k: &SirState<T>, h: T) -> SirState<T> {
    let comb = |a: &[T], b: &[T]| -> Vec<T> {
        a.iter().zip(b).map(|(&x, &y)| x + h * y).collect()
    };
    SirState {
        s: comb(&state.s, &k.s),
        i: comb(&state.i, &k.i),
        r: comb(&state.r, &k.r),
    }
}

/// One fixed-step RK4 step of the SIR system.
pub fn sir_step<T: Scalar>(
    state: &SirState<T>,
    params: &SirParams<T>,
    dt: T,
) -> Result<SirState<T>, EpiError> {
    assert!(dt > T::zero(), "dt must be positive");
    let half = dt / T::from_f64_c(2.0);
    let k1 = sir_rhs(state, params);
    let k2 = sir_rhs(&axpy(state, &k1, half), params);
    let k3 = sir_rhs(&axpy(state, &k2, half), params);
    let k4 = sir_rhs(&axpy(state, &k3, dt), params);
    let sixth = dt / T::from_f64_c(6.0);
    let two = T::from_f64_c(2.0);
    let n = state.n();
    let mut next = state.clone();
    for v in 0..n {
        next.s[v] = state.s[v] + sixth * (k1.s[v] + two * k2.s[v] + two * k3.s[v] + k4.s[v]);
        next.i[v] = state.i[v] + sixth * (k1.i[v] + two * k2.i[v] + two * k3.i[v] + k4.i[v]);
        next.r[v] = state.r[v] + sixth * (k1.r[v] + two * k2.r[v] + two * k3.r[v] + k4.r[v]);
    }
    next.check()?;
    Ok(next)
}

/// Integrate `steps` RK4 steps.
pub fn sir_integrate<T: Scalar>(
    state: &SirState<T>,
    params: &SirParams<T>,
    dt: T,
    steps: usize,
) -> Result<SirState<T>, EpiError> {
    let mut current = state.clone();
    for _ in 0..steps {
        current = sir_step(&current, params, dt)?;
    }
    Ok(current)
}

/// Instantaneous `di/dt` at one district; used to probe the herd-immunity
/// boundary.
pub fn infection_derivative<T: Scalar>(state: &SirState<T>, params: &SirParams<T>, v: usize) -> T {
    sir_rhs(state, params).i[v]
}

/// Herd-immunity vaccination targets: the vaccinated fraction per district
/// above which prevalence declines, clamped to `[0, 1]`.
pub fn herd_immunity_targets<T: Scalar>(params: &SirParams<T>) -> Result<Vec<T>, EpiError> {
    let n = params.n();
    let mut targets = Vec::with_capacity(n);
    for u in 0..n {
        let mut force = T::zero();
        for v in 0..n {
            force += params.beta.at(v, u) * params.kappa.at(v, u);
        }
        if force == T::zero() {
            return Err(EpiError::DegenerateForce(u));
        }
        let level = (force - params.gamma) / force;
        targets.push(level.max(T::zero()).min(T::one()));
    }
    Ok(targets)
}

/// Prevalence-ratio matrix from a prevalence snapshot:
/// `kappa[u][v] = prevalence[u] / prevalence[v]`.
pub fn estimate_kappa<T: Scalar>(prevalence: &[T]) -> Result<Grid<T>, EpiError> {
    if let Some(bad) = prevalence.iter().position(|&p| !(p > T::zero())) {
        return Err(EpiError::ZeroPrevalence(bad));
    }
    let n = prevalence.len();
    let mut kappa = Grid::filled(n, n, T::one());
    for u in 0..n {
        for v in 0..n {
            kappa.set(u, v, prevalence[u] / prevalence[v]);
        }
    }
    Ok(kappa)
}

/// Per-period prioritization weights: commuter out-flow shares decayed
/// geometrically, with period 0 undecayed.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityScores<T = f64> {
    base: Vec<T>,
    delta: Grid<T>,
    decay: T,
}

impl<T: Scalar> PriorityScores<T> {
    pub fn n(&self) -> usize {
        self.base.len()
    }

    pub fn horizon(&self) -> usize {
        self.delta.rows()
    }

    pub fn base(&self) -> &[T] {
        &self.base
    }

    pub fn decay(&self) -> T {
        self.decay
    }

    #[inline]
    pub fn delta(&self, period: usize, district: usize) -> T {
        self.delta.at(period, district)
    }
}

/// Flow-out shares with geometric decay across periods.
pub fn priority_scores<T: Scalar>(
    commuters: &CommuterMatrix,
    horizon: usize,
    decay: T,
) -> Result<PriorityScores<T>, EpiError> {
    if !(decay > T::zero() && decay <= T::one()) {
        return Err(EpiError::BadDecay(decay.to_f64().unwrap_or(f64::NAN)));
    }
    let total = commuters.total_flow();
    if total == 0 {
        return Err(EpiError::ZeroFlow);
    }
    let n = commuters.n();
    let total = T::from_count(total);
    let base: Vec<T> = (0..n)
        .map(|u| T::from_count(commuters.out_flow(u)) / total)
        .collect();
    let mut delta = Grid::filled(horizon, n, T::zero());
    // Period 0 carries the undecayed shares; later periods follow the exact
    // geometric recurrence so delta[t] / delta[t-1] reproduces the decay.
    for t in 0..horizon {
        for u in 0..n {
            let value = if t == 0 {
                base[u]
            } else {
                delta.at(t - 1, u) * decay
            };
            delta.set(t, u, value);
        }
    }
    Ok(PriorityScores { base, delta, decay })
}
