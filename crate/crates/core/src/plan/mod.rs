//! MILP construction for the three planning formulations and metric
//! evaluation of candidate allocation plans.
//!
//! The travel-only model assigns every resident to an open mega-site at
//! minimum total inconvenience; its non-commuter restriction treats the
//! whole population as vaccinating from home. The multi-objective model
//! adds weighted shortfall-versus-target and per-period equity terms.

mod metrics;
mod model;

pub use metrics::{
    check_plan, evaluate_plan, evaluate_plan_unchecked, evaluate_under_commuter_costs,
    AllocationPlan, ConstraintFamily, PlanMetrics, Violation,
};
pub use model::{
    build_p1, build_p2, build_p2_fixed, ConstraintDef, Formulation, ModelData, ModelMeta,
    PlanModel, Sense, VarDef, VarKind,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("mega-site budget K must lie in 1..=n, got {k} with n = {n}")]
    BadK { k: usize, n: usize },
    #[error("supply schedule is all zero; no allocation can exist")]
    ZeroCapacity,
    #[error("objective weights must be nonnegative")]
    NegativeWeight,
    #[error("priority scores cover {got} periods but the horizon is {need}")]
    ScoreHorizonTooShort { got: usize, need: usize },
    #[error("targets must lie in [0, 1]; district {0} does not")]
    BadTarget(usize),
    #[error("{got} fixed sites exceed the budget K = {k}")]
    TooManySites { got: usize, k: usize },
    #[error("fixed site index {0} out of range")]
    BadFixedSite(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("plan violates the model constraints: {summary}")]
    InfeasiblePlan {
        summary: String,
        violations: Vec<Violation>,
    },
}
