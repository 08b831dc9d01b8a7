//! Mega-site location, vaccine allocation, and epidemic evaluation.
//!
//! The crate covers the full planning pipeline:
//!
//! - [`ingest`]: CSV loading and validation of districts, commuter flows,
//!   travel times, and dose supply into one shared district index space.
//! - [`travel`]: commuter-aware travel inconvenience (the four-option
//!   minimum), round trips, and the logit vaccination-acceptance model.
//! - [`epi`]: simplified multi-district SIR dynamics, herd-immunity
//!   vaccination targets, prevalence ratios, and prioritization scores.
//! - [`plan`]: MILP construction for the travel-only and multi-objective
//!   formulations, plus metric evaluation of candidate allocation plans.
//! - [`solve`]: an exact exhaustive backend for small instances, an MPS
//!   export/import bridge for external solvers, and a constraint validator.
//! - [`evaluate`]: the detailed eight-compartment epidemic model, its
//!   calibration loop, and infections-averted accounting.
//!
//! All numeric kernels are generic over a [`Scalar`] floating type
//! (`f32`/`f64`); the aliases at the crate root fix `f64`, which is what the
//! CLI and most callers want.

pub mod epi;
pub mod evaluate;
pub mod grid;
pub mod ingest;
pub mod plan;
pub mod scalar;
pub mod solve;
pub mod travel;

#[cfg(test)]
pub(crate) mod testutil;

pub use grid::Grid;
pub use scalar::Scalar;

/// `f64`-backed travel matrix.
pub type TravelMatrix = ingest::TravelMatrix<f64>;
/// `f64`-backed travel model (round trips plus the commuter tensor).
pub type TravelModel = travel::TravelModel<f64>;
/// `f64`-backed logit acceptance model.
pub type AcceptanceModel = travel::AcceptanceModel<f64>;
/// `f64`-backed SIR parameters.
pub type SirParams = epi::SirParams<f64>;
/// `f64`-backed SIR state.
pub type SirState = epi::SirState<f64>;
/// `f64`-backed prioritization scores.
pub type PriorityScores = epi::PriorityScores<f64>;
/// `f64`-backed MILP model.
pub type PlanModel = plan::PlanModel<f64>;
/// `f64`-backed solve report.
pub type SolveReport = solve::SolveReport<f64>;
/// `f64`-backed compartmental parameters.
pub type EpiParams = evaluate::EpiParams<f64>;
/// `f64`-backed compartmental state.
pub type EpiState = evaluate::EpiState<f64>;
