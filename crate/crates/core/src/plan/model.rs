//! Abstract MILP representation and the formulation builders.
//!
//! Variable ordering is fixed: all `x` (site openings), then `y` by
//! `(t, u, w)`, then `z` by `(t, u, v, w)`, then shortfall variables by
//! `(t, u)`, then equity variables by `t`. Constraint ordering follows the
//! build sequence below and row names carry the family prefix plus
//! zero-padded indices, which is also the MPS compatibility contract.

use crate::epi::PriorityScores;
use crate::grid::Grid;
use crate::ingest::{CommuterMatrix, DistrictTable, SupplySchedule};
use crate::scalar::Scalar;
use crate::travel::TravelModel;

use super::PlanError;

/// Variable domains; all kinds are implicitly bounded below by zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct VarDef<T> {
    pub name: String,
    pub kind: VarKind,
    pub lower: T,
    pub upper: Option<T>,
}

impl<T: Scalar> VarDef<T> {
    /// Fixed variables carry equal bounds.
    pub fn fixed_value(&self) -> Option<T> {
        match self.upper {
            Some(upper) if upper == self.lower => Some(upper),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintDef<T> {
    pub name: String,
    /// Sparse `(variable index, coefficient)` terms.
    pub terms: Vec<(usize, T)>,
    pub sense: Sense,
    pub rhs: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    P0,
    P1,
    P2,
    P2Fixed,
}

impl Formulation {
    pub fn tag(&self) -> &'static str {
        match self {
            Formulation::P0 => "P0",
            Formulation::P1 => "P1",
            Formulation::P2 => "P2",
            Formulation::P2Fixed => "P2-fixed",
        }
    }
}

/// Model-wide dimensions and weights.
#[derive(Debug, Clone)]
pub struct ModelMeta<T> {
    pub formulation: Formulation,
    pub n: usize,
    pub horizon: usize,
    pub equity_horizon: usize,
    pub k: usize,
    pub lambda: T,
    pub lambda_eq: T,
    pub include_commuters: bool,
    pub warnings: Vec<String>,
}

/// Structured problem data kept alongside the row/column form so solvers,
/// validators, and metric evaluation work from one source.
#[derive(Debug, Clone)]
pub struct ModelData<T> {
    /// Population per district.
    pub populations: Vec<u64>,
    /// Commuter counts (all zero for the non-commuter restriction).
    pub commuters: Grid<u64>,
    /// Round-trip minutes per `(u, w)`.
    pub roundtrip: Grid<T>,
    /// Commuter minutes per `(u, v, w)`, flattened; empty when commuters are
    /// excluded.
    pub commuter_cost: Vec<T>,
    /// Doses per `(t, w)`.
    pub supply: Grid<u64>,
    /// Herd-immunity vaccination targets (multi-objective models only).
    pub targets: Option<Vec<T>>,
    /// Prioritization weights per `(t, u)` (multi-objective models only).
    pub delta: Option<Grid<T>>,
    /// Sites pinned open (fixed-location benchmark only).
    pub fixed_sites: Option<Vec<usize>>,
    pub district_ids: Vec<String>,
}

impl<T: Scalar> ModelData<T> {
    /// Non-commuter demand of district `u`.
    pub fn noncommuter_demand(&self, u: usize) -> u64 {
        let out: u64 = self.commuters.row(u).iter().sum();
        self.populations[u] - out
    }

    #[inline]
    pub fn commuter_minutes(&self, u: usize, v: usize, w: usize) -> T {
        let n = self.populations.len();
        self.commuter_cost[(u * n + v) * n + w]
    }
}

/// The abstract MILP: ordered variables, sparse linear constraints, and a
/// sparse minimization objective, plus structured problem data.
#[derive(Debug, Clone)]
pub struct PlanModel<T = f64> {
    pub variables: Vec<VarDef<T>>,
    pub constraints: Vec<ConstraintDef<T>>,
    pub objective: Vec<(usize, T)>,
    pub meta: ModelMeta<T>,
    pub data: ModelData<T>,
}

impl<T: Scalar> PlanModel<T> {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Index of `x_u`.
    pub fn x_index(&self, u: usize) -> usize {
        u
    }

    /// Index of `y_{t,u,w}`.
    pub fn y_index(&self, t: usize, u: usize, w: usize) -> usize {
        let n = self.meta.n;
        n + (t * n + u) * n + w
    }

    /// Index of `z_{t,u,v,w}`; only valid when commuters are included.
    pub fn z_index(&self, t: usize, u: usize, v: usize, w: usize) -> usize {
        debug_assert!(self.meta.include_commuters);
        let n = self.meta.n;
        let z_base = n + self.meta.horizon * n * n;
        z_base + ((t * n + u) * n + v) * n + w
    }

    /// Index of the shortfall variable for `(t, u)`, if present.
    pub fn zeta_index(&self, t: usize, u: usize) -> Option<usize> {
        self.zeta_base().map(|base| base + t * self.meta.n + u)
    }

    /// Index of the equity variable for `t` within the equity horizon.
    pub fn tau_index(&self, t: usize) -> Option<usize> {
        if t >= self.meta.equity_horizon {
            return None;
        }
        self.zeta_base()
            .map(|base| base + self.meta.horizon * self.meta.n + t)
    }

    fn zeta_base(&self) -> Option<usize> {
        if !self.has_penalty_vars() {
            return None;
        }
        let n = self.meta.n;
        let mut base = n + self.meta.horizon * n * n;
        if self.meta.include_commuters {
            base += self.meta.horizon * n * n * n;
        }
        Some(base)
    }

    fn has_penalty_vars(&self) -> bool {
        matches!(
            self.meta.formulation,
            Formulation::P2 | Formulation::P2Fixed
        )
    }

    /// Evaluate the objective row at a dense assignment.
    pub fn objective_value(&self, assignment: &[T]) -> T {
        let mut total = T::zero();
        for &(index, coeff) in &self.objective {
            total += coeff * assignment[index];
        }
        total
    }

    /// Count variables of one kind.
    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }
}

fn pad(value: usize) -> String {
    format!("{value:02}")
}

struct Builder<T> {
    variables: Vec<VarDef<T>>,
    constraints: Vec<ConstraintDef<T>>,
    objective: Vec<(usize, T)>,
}

impl<T: Scalar> Builder<T> {
    fn new() -> Self {
        Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
        }
    }

    fn add_var(&mut self, name: String, kind: VarKind, lower: T, upper: Option<T>) -> usize {
        self.variables.push(VarDef {
            name,
            kind,
            lower,
            upper,
        });
        self.variables.len() - 1
    }

    fn add_con(&mut self, name: String, terms: Vec<(usize, T)>, sense: Sense, rhs: T) {
        self.constraints.push(ConstraintDef {
            name,
            terms,
            sense,
            rhs,
        });
    }
}

struct BuildInputs<'a, T> {
    table: &'a DistrictTable,
    commuters: &'a CommuterMatrix,
    travel: &'a TravelModel<T>,
    supply: &'a SupplySchedule,
    k: usize,
    include_commuters: bool,
    penalty: Option<PenaltyInputs<'a, T>>,
    fixed_sites: Option<Vec<usize>>,
}

struct PenaltyInputs<'a, T> {
    targets: &'a [T],
    scores: &'a PriorityScores<T>,
    lambda: T,
    lambda_eq: T,
}

fn build_model<T: Scalar>(inputs: BuildInputs<'_, T>) -> Result<PlanModel<T>, PlanError> {
    let n = inputs.table.len();
    let horizon = inputs.supply.horizon();
    let equity_horizon = inputs.supply.equity_horizon();
    if inputs.k == 0 || inputs.k > n {
        return Err(PlanError::BadK { k: inputs.k, n });
    }
    if inputs.supply.total() == 0 {
        return Err(PlanError::ZeroCapacity);
    }
    if inputs.commuters.n() != n || inputs.travel.n() != n || inputs.supply.n() != n {
        return Err(PlanError::DimensionMismatch(
            "district counts differ between inputs".into(),
        ));
    }
    if let Some(penalty) = &inputs.penalty {
        if !(penalty.lambda >= T::zero() && penalty.lambda_eq >= T::zero()) {
            return Err(PlanError::NegativeWeight);
        }
        if penalty.scores.horizon() < horizon {
            return Err(PlanError::ScoreHorizonTooShort {
                got: penalty.scores.horizon(),
                need: horizon,
            });
        }
        if penalty.targets.len() != n {
            return Err(PlanError::DimensionMismatch(
                "target vector length differs from district count".into(),
            ));
        }
        if let Some(bad) = penalty
            .targets
            .iter()
            .position(|&l| !(l >= T::zero() && l <= T::one()))
        {
            return Err(PlanError::BadTarget(bad));
        }
    }
    if let Some(fixed) = &inputs.fixed_sites {
        if fixed.len() > inputs.k {
            return Err(PlanError::TooManySites {
                got: fixed.len(),
                k: inputs.k,
            });
        }
        if let Some(&bad) = fixed.iter().find(|&&w| w >= n) {
            return Err(PlanError::BadFixedSite(bad));
        }
    }

    let include_commuters = inputs.include_commuters;
    let effective_commuters = if include_commuters {
        inputs.commuters.clone()
    } else {
        CommuterMatrix::zero(n)
    };

    let mut warnings = Vec::new();
    // Supply adequacy over the K best site columns; a shortfall cannot be
    // fixed by any site choice, but the model is still built so it can be
    // inspected and exported.
    let mut column_totals: Vec<u64> = (0..n).map(|w| inputs.supply.district_total(w)).collect();
    column_totals.sort_unstable_by(|a, b| b.cmp(a));
    let best_k: u64 = column_totals.iter().take(inputs.k).sum();
    let total_population = inputs.table.total_population();
    if best_k < total_population {
        warnings.push(format!(
            "infeasible by construction: the {} highest-capacity site columns supply {} doses \
             for a population of {}",
            inputs.k, best_k, total_population
        ));
    }

    let mut b = Builder::new();

    // Columns: x, then y, then z, then shortfall, then equity.
    for u in 0..n {
        let pinned = inputs
            .fixed_sites
            .as_ref()
            .map(|fixed| fixed.contains(&u));
        let (lower, upper) = match pinned {
            Some(true) => (T::one(), Some(T::one())),
            Some(false) => (T::zero(), Some(T::zero())),
            None => (T::zero(), Some(T::one())),
        };
        b.add_var(format!("X_{}", pad(u)), VarKind::Binary, lower, upper);
    }
    for t in 0..horizon {
        for u in 0..n {
            let demand = effective_commuters.non_commuters(u, inputs.table);
            for w in 0..n {
                let ub = demand.min(inputs.supply.at(t, w));
                b.add_var(
                    format!("Y_{}_{}_{}", pad(t), pad(u), pad(w)),
                    VarKind::Integer,
                    T::zero(),
                    Some(T::from_count(ub)),
                );
            }
        }
    }
    if include_commuters {
        for t in 0..horizon {
            for u in 0..n {
                for v in 0..n {
                    let demand = effective_commuters.at(u, v);
                    for w in 0..n {
                        let ub = demand.min(inputs.supply.at(t, w));
                        b.add_var(
                            format!("Z_{}_{}_{}_{}", pad(t), pad(u), pad(v), pad(w)),
                            VarKind::Integer,
                            T::zero(),
                            Some(T::from_count(ub)),
                        );
                    }
                }
            }
        }
    }
    if inputs.penalty.is_some() {
        for t in 0..horizon {
            for u in 0..n {
                b.add_var(
                    format!("ZETA_{}_{}", pad(t), pad(u)),
                    VarKind::Continuous,
                    T::zero(),
                    None,
                );
            }
        }
        for t in 0..equity_horizon {
            b.add_var(format!("TAU_{}", pad(t)), VarKind::Continuous, T::zero(), None);
        }
    }

    let y_index = |t: usize, u: usize, w: usize| n + (t * n + u) * n + w;
    let z_base = n + horizon * n * n;
    let z_index = |t: usize, u: usize, v: usize, w: usize| z_base + ((t * n + u) * n + v) * n + w;
    let zeta_base = z_base + if include_commuters { horizon * n * n * n } else { 0 };
    let zeta_index = |t: usize, u: usize| zeta_base + t * n + u;
    let tau_index = |t: usize| zeta_base + horizon * n + t;

    // Objective: travel terms first, then weighted shortfall and equity.
    for t in 0..horizon {
        for u in 0..n {
            for w in 0..n {
                let minutes = inputs.travel.roundtrip(u, w);
                if minutes != T::zero() {
                    b.objective.push((y_index(t, u, w), minutes));
                }
            }
        }
    }
    if include_commuters {
        for t in 0..horizon {
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        let minutes = inputs.travel.commuter(u, v, w);
                        if minutes != T::zero() {
                            b.objective.push((z_index(t, u, v, w), minutes));
                        }
                    }
                }
            }
        }
    }
    if let Some(penalty) = &inputs.penalty {
        for t in 0..horizon {
            for u in 0..n {
                let weight = penalty.lambda * penalty.scores.delta(t, u);
                if weight != T::zero() {
                    b.objective.push((zeta_index(t, u), weight));
                }
            }
        }
        for t in 0..equity_horizon {
            if penalty.lambda_eq != T::zero() {
                b.objective.push((tau_index(t), penalty.lambda_eq));
            }
        }
    }

    // 1a: at most K sites.
    b.add_con(
        "SITES".into(),
        (0..n).map(|u| (u, T::one())).collect(),
        Sense::Le,
        T::from_count(inputs.k as u64),
    );
    // 1b: every non-commuter is vaccinated in some period at some site.
    for u in 0..n {
        let terms = (0..horizon)
            .flat_map(|t| (0..n).map(move |w| (y_index(t, u, w), T::one())))
            .collect();
        b.add_con(
            format!("DEMN_{}", pad(u)),
            terms,
            Sense::Eq,
            T::from_count(effective_commuters.non_commuters(u, inputs.table)),
        );
    }
    // 1c: every commuter group is vaccinated.
    if include_commuters {
        for u in 0..n {
            for v in 0..n {
                let terms = (0..horizon)
                    .flat_map(|t| (0..n).map(move |w| (z_index(t, u, v, w), T::one())))
                    .collect();
                b.add_con(
                    format!("DEMC_{}_{}", pad(u), pad(v)),
                    terms,
                    Sense::Eq,
                    T::from_count(effective_commuters.at(u, v)),
                );
            }
        }
    }
    // 1d/1e: assignments only at open sites, with the site-period capacity
    // as the linking constant.
    for t in 0..horizon {
        for u in 0..n {
            for w in 0..n {
                let m = T::from_count(inputs.supply.at(t, w));
                b.add_con(
                    format!("LNKY_{}_{}_{}", pad(t), pad(u), pad(w)),
                    vec![(y_index(t, u, w), T::one()), (w, -m)],
                    Sense::Le,
                    T::zero(),
                );
            }
        }
    }
    if include_commuters {
        for t in 0..horizon {
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        let m = T::from_count(inputs.supply.at(t, w));
                        b.add_con(
                            format!("LNKZ_{}_{}_{}_{}", pad(t), pad(u), pad(v), pad(w)),
                            vec![(z_index(t, u, v, w), T::one()), (w, -m)],
                            Sense::Le,
                            T::zero(),
                        );
                    }
                }
            }
        }
    }
    // 1f: site-period capacity.
    for t in 0..horizon {
        for w in 0..n {
            let mut terms: Vec<(usize, T)> =
                (0..n).map(|u| (y_index(t, u, w), T::one())).collect();
            if include_commuters {
                for u in 0..n {
                    for v in 0..n {
                        terms.push((z_index(t, u, v, w), T::one()));
                    }
                }
            }
            b.add_con(
                format!("CAP_{}_{}", pad(t), pad(w)),
                terms,
                Sense::Le,
                T::from_count(inputs.supply.at(t, w)),
            );
        }
    }
    // 2g: shortfall below the vaccination target; the variable is also
    // bounded below by zero so the minimization is well-posed.
    // 2h: per-period equity spread over ordered district pairs.
    if let Some(penalty) = &inputs.penalty {
        for t in 0..horizon {
            for u in 0..n {
                let mut terms = vec![(zeta_index(t, u), T::one())];
                for t_prior in 0..=t {
                    for w in 0..n {
                        terms.push((y_index(t_prior, u, w), T::one()));
                    }
                    if include_commuters {
                        for v in 0..n {
                            for w in 0..n {
                                terms.push((z_index(t_prior, u, v, w), T::one()));
                            }
                        }
                    }
                }
                let rhs = T::from_count(inputs.table.population(u)) * penalty.targets[u];
                b.add_con(format!("SHORT_{}_{}", pad(t), pad(u)), terms, Sense::Ge, rhs);
            }
        }
        for t in 0..equity_horizon {
            for u in 0..n {
                for u_other in 0..n {
                    if u == u_other {
                        continue;
                    }
                    let mut terms = vec![(tau_index(t), T::one())];
                    for w in 0..n {
                        terms.push((y_index(t, u, w), -T::one()));
                        terms.push((y_index(t, u_other, w), T::one()));
                    }
                    if include_commuters {
                        for v in 0..n {
                            for w in 0..n {
                                terms.push((z_index(t, u, v, w), -T::one()));
                                terms.push((z_index(t, u_other, v, w), T::one()));
                            }
                        }
                    }
                    b.add_con(
                        format!("EQ_{}_{}_{}", pad(t), pad(u), pad(u_other)),
                        terms,
                        Sense::Ge,
                        T::zero(),
                    );
                }
            }
        }
    }

    let formulation = match (&inputs.penalty, &inputs.fixed_sites, include_commuters) {
        (None, _, false) => Formulation::P0,
        (None, _, true) => Formulation::P1,
        (Some(_), None, _) => Formulation::P2,
        (Some(_), Some(_), _) => Formulation::P2Fixed,
    };

    let commuter_cost = if include_commuters {
        let mut tensor = vec![T::zero(); n * n * n];
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    tensor[(u * n + v) * n + w] = inputs.travel.commuter(u, v, w);
                }
            }
        }
        tensor
    } else {
        Vec::new()
    };
    let mut roundtrip = Grid::filled(n, n, T::zero());
    for u in 0..n {
        for w in 0..n {
            roundtrip.set(u, w, inputs.travel.roundtrip(u, w));
        }
    }

    let (lambda, lambda_eq, targets, delta) = match &inputs.penalty {
        Some(p) => {
            let mut delta = Grid::filled(horizon, n, T::zero());
            for t in 0..horizon {
                for u in 0..n {
                    delta.set(t, u, p.scores.delta(t, u));
                }
            }
            (
                p.lambda,
                p.lambda_eq,
                Some(p.targets.to_vec()),
                Some(delta),
            )
        }
        None => (T::zero(), T::zero(), None, None),
    };

    Ok(PlanModel {
        variables: b.variables,
        constraints: b.constraints,
        objective: b.objective,
        meta: ModelMeta {
            formulation,
            n,
            horizon,
            equity_horizon,
            k: inputs.k,
            lambda,
            lambda_eq,
            include_commuters,
            warnings,
        },
        data: ModelData {
            populations: inputs.table.populations().to_vec(),
            commuters: effective_commuters.grid().clone(),
            roundtrip,
            commuter_cost,
            supply: inputs.supply.grid().clone(),
            targets,
            delta,
            fixed_sites: inputs.fixed_sites,
            district_ids: inputs.table.ids().to_vec(),
        },
    })
}

/// Travel-only model; with `include_commuters` false this is the
/// non-commuter restriction (commuter counts forced to zero, no `z`
/// variables).
pub fn build_p1<T: Scalar>(
    table: &DistrictTable,
    commuters: &CommuterMatrix,
    travel: &TravelModel<T>,
    supply: &SupplySchedule,
    k: usize,
    include_commuters: bool,
) -> Result<PlanModel<T>, PlanError> {
    build_model(BuildInputs {
        table,
        commuters,
        travel,
        supply,
        k,
        include_commuters,
        penalty: None,
        fixed_sites: None,
    })
}

/// Multi-objective model: travel plus weighted shortfall and equity terms.
#[allow(clippy::too_many_arguments)]
pub fn build_p2<T: Scalar>(
    table: &DistrictTable,
    commuters: &CommuterMatrix,
    travel: &TravelModel<T>,
    supply: &SupplySchedule,
    k: usize,
    targets: &[T],
    scores: &PriorityScores<T>,
    lambda: T,
    lambda_eq: T,
) -> Result<PlanModel<T>, PlanError> {
    build_model(BuildInputs {
        table,
        commuters,
        travel,
        supply,
        k,
        include_commuters: true,
        penalty: Some(PenaltyInputs {
            targets,
            scores,
            lambda,
            lambda_eq,
        }),
        fixed_sites: None,
    })
}

/// Multi-objective model with the site-opening vector pinned (as bounds, so
/// the validator still sees the variables).
#[allow(clippy::too_many_arguments)]
pub fn build_p2_fixed<T: Scalar>(
    table: &DistrictTable,
    commuters: &CommuterMatrix,
    travel: &TravelModel<T>,
    supply: &SupplySchedule,
    k: usize,
    targets: &[T],
    scores: &PriorityScores<T>,
    lambda: T,
    lambda_eq: T,
    fixed_sites: &[usize],
) -> Result<PlanModel<T>, PlanError> {
    let mut fixed: Vec<usize> = fixed_sites.to_vec();
    fixed.sort_unstable();
    fixed.dedup();
    build_model(BuildInputs {
        table,
        commuters,
        travel,
        supply,
        k,
        include_commuters: true,
        penalty: Some(PenaltyInputs {
            targets,
            scores,
            lambda,
            lambda_eq,
        }),
        fixed_sites: Some(fixed),
    })
}
