//! Solving, exporting, importing, and validating plan models.
//!
//! Two backends: an exact exhaustive solver for small instances and a
//! free-format MPS bridge for external MILP solvers at full scale. Every
//! solution, whichever path produced it, goes through the same validator.

mod exhaustive;
mod flow;
mod mps;

pub use exhaustive::solve_exhaustive;
pub use flow::FlowNetwork;
pub use mps::{export_mps, parse_mps, structural_mismatch, structurally_identical, ParsedModel, ParsedRow};

use std::path::Path;
use std::time::Duration;

use thiserror::Error;

use crate::plan::{
    evaluate_plan_unchecked, AllocationPlan, ConstraintFamily, PlanError, PlanMetrics, PlanModel,
    Sense, Violation,
};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("{subsets} site subsets exceed the enumeration limit {limit}")]
    TooLarge { subsets: u64, limit: u64 },
    #[error("time budget exhausted")]
    TimeBudget,
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {reason}")]
    Parse {
        path: String,
        line: u64,
        reason: String,
    },
    #[error("unknown variable {name:?}")]
    UnknownVariable { name: String },
    #[error("variable {name:?} = {value} is not integral within 1e-6")]
    NonIntegralValue { name: String, value: f64 },
    #[error("variable {name:?} = {value} violates its bounds")]
    ValueOutOfBounds { name: String, value: f64 },
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    Exported,
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Exported => "exported",
        }
    }
}

/// Enumeration and wall-clock limits for the exhaustive backend.
#[derive(Debug, Clone)]
pub struct SolveLimits {
    pub max_subsets: u64,
    pub time_budget: Duration,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            max_subsets: 100_000,
            time_budget: Duration::from_secs(120),
        }
    }
}

/// Outcome of one solve (or export) pass.
#[derive(Debug, Clone)]
pub struct SolveReport<T = f64> {
    pub status: SolveStatus,
    pub plan: Option<AllocationPlan>,
    pub objective: Option<T>,
    pub metrics: Option<PlanMetrics<T>>,
    /// Optimality gap; zero for the exhaustive backend.
    pub gap: T,
    pub nodes_or_subsets: u64,
    pub wall_time_secs: f64,
}

impl<T: Scalar> SolveReport<T> {
    pub fn infeasible(nodes_or_subsets: u64, wall_time_secs: f64) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            plan: None,
            objective: None,
            metrics: None,
            gap: T::zero(),
            nodes_or_subsets,
            wall_time_secs,
        }
    }
}

/// Dense variable assignment implied by a plan; shortfall and equity
/// variables take their minimal feasible values.
pub fn plan_assignment<T: Scalar>(model: &PlanModel<T>, plan: &AllocationPlan) -> Vec<T> {
    let n = model.meta.n;
    let horizon = model.meta.horizon;
    let mut assignment = vec![T::zero(); model.n_vars()];
    for (w, &open) in plan.open.iter().enumerate() {
        assignment[model.x_index(w)] = if open { T::one() } else { T::zero() };
    }
    for t in 0..horizon {
        for u in 0..n {
            for w in 0..n {
                assignment[model.y_index(t, u, w)] = T::from_count(plan.y_at(t, u, w));
            }
        }
    }
    if model.meta.include_commuters && plan.has_commuters() {
        for t in 0..horizon {
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        assignment[model.z_index(t, u, v, w)] =
                            T::from_count(plan.z_at(t, u, v, w));
                    }
                }
            }
        }
    }
    if let Some(targets) = &model.data.targets {
        for t in 0..horizon {
            for u in 0..n {
                if let Some(index) = model.zeta_index(t, u) {
                    let goal = T::from_count(model.data.populations[u]) * targets[u];
                    let cum = T::from_count(plan.cumulative_vaccinated(t, u));
                    assignment[index] = (goal - cum).max(T::zero());
                }
            }
        }
        for t in 0..model.meta.equity_horizon {
            if let Some(index) = model.tau_index(t) {
                let mut lo = u64::MAX;
                let mut hi = 0u64;
                for u in 0..n {
                    let vax = plan.vaccinated(t, u);
                    lo = lo.min(vax);
                    hi = hi.max(vax);
                }
                assignment[index] = T::from_count(hi.saturating_sub(lo));
            }
        }
    }
    assignment
}

/// Check a plan against every generated constraint row plus pinned bounds;
/// empty result means feasible.
///
/// This walks the model's row form and is deliberately independent of the
/// structural checks in `plan::check_plan`.
pub fn validate<T: Scalar>(model: &PlanModel<T>, plan: &AllocationPlan) -> Vec<Violation> {
    let mut violations = Vec::new();
    if plan.n != model.meta.n
        || plan.horizon != model.meta.horizon
        || plan.has_commuters() != model.meta.include_commuters
    {
        violations.push(Violation {
            family: ConstraintFamily::Bounds,
            row: "SHAPE".into(),
            slack: f64::NEG_INFINITY,
        });
        return violations;
    }
    let assignment = plan_assignment(model, plan);
    for (index, variable) in model.variables.iter().enumerate() {
        let value = assignment[index];
        let tolerance = T::from_f64_c(1e-6);
        let lower_ok = value >= variable.lower - tolerance;
        let upper_ok = variable
            .upper
            .map(|upper| value <= upper + tolerance)
            .unwrap_or(true);
        if !(lower_ok && upper_ok) {
            violations.push(Violation {
                family: ConstraintFamily::Bounds,
                row: variable.name.clone(),
                slack: f64::NAN,
            });
        }
    }
    for constraint in &model.constraints {
        let mut lhs = T::zero();
        for &(index, coeff) in &constraint.terms {
            lhs += coeff * assignment[index];
        }
        let tolerance = T::from_f64_c(1e-6) * (T::one() + constraint.rhs.abs());
        let slack = match constraint.sense {
            Sense::Le => constraint.rhs - lhs,
            Sense::Ge => lhs - constraint.rhs,
            Sense::Eq => -(lhs - constraint.rhs).abs(),
        };
        if slack < -tolerance {
            violations.push(Violation {
                family: ConstraintFamily::from_row_name(&constraint.name)
                    .unwrap_or(ConstraintFamily::Bounds),
                row: constraint.name.clone(),
                slack: slack.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    violations
}

/// Parse a `name value` solution file, assemble the plan, and run full
/// validation plus metric evaluation. Unlisted variables default to zero.
pub fn import_solution<T: Scalar>(
    model: &PlanModel<T>,
    path: &Path,
) -> Result<(AllocationPlan, PlanMetrics<T>), SolveError> {
    let text = std::fs::read_to_string(path).map_err(|source| SolveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut values: std::collections::BTreeMap<&str, f64> = std::collections::BTreeMap::new();
    let mut names: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for (index, variable) in model.variables.iter().enumerate() {
        names.insert(variable.name.as_str(), index);
    }
    for (line_index, line) in text.lines().enumerate() {
        let line_no = line_index as u64 + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let (Some(name), Some(value)) = (parts.next(), parts.next()) else {
            return Err(SolveError::Parse {
                path: path.display().to_string(),
                line: line_no,
                reason: "expected `name value`".into(),
            });
        };
        if parts.next().is_some() {
            return Err(SolveError::Parse {
                path: path.display().to_string(),
                line: line_no,
                reason: "trailing fields".into(),
            });
        }
        let value: f64 = value.parse().map_err(|_| SolveError::Parse {
            path: path.display().to_string(),
            line: line_no,
            reason: format!("bad numeric value {value:?}"),
        })?;
        if !names.contains_key(name) {
            return Err(SolveError::UnknownVariable {
                name: name.to_owned(),
            });
        }
        values.insert(name, value);
    }

    let round_integral = |name: &str, value: f64| -> Result<u64, SolveError> {
        let rounded = value.round();
        if (value - rounded).abs() > 1e-6 {
            return Err(SolveError::NonIntegralValue {
                name: name.to_owned(),
                value,
            });
        }
        if rounded < 0.0 {
            return Err(SolveError::ValueOutOfBounds {
                name: name.to_owned(),
                value,
            });
        }
        Ok(rounded as u64)
    };

    let n = model.meta.n;
    let horizon = model.meta.horizon;
    let mut plan = AllocationPlan::zero(n, horizon, model.meta.include_commuters);
    let lookup = |name: &String| values.get(name.as_str()).copied().unwrap_or(0.0);
    for u in 0..n {
        let name = &model.variables[model.x_index(u)].name;
        let value = round_integral(name, lookup(name))?;
        if value > 1 {
            return Err(SolveError::ValueOutOfBounds {
                name: name.clone(),
                value: value as f64,
            });
        }
        plan.open[u] = value == 1;
    }
    for t in 0..horizon {
        for u in 0..n {
            for w in 0..n {
                let name = &model.variables[model.y_index(t, u, w)].name;
                plan.set_y(t, u, w, round_integral(name, lookup(name))?);
            }
        }
    }
    if model.meta.include_commuters {
        for t in 0..horizon {
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        let name = &model.variables[model.z_index(t, u, v, w)].name;
                        plan.set_z(t, u, v, w, round_integral(name, lookup(name))?);
                    }
                }
            }
        }
    }

    let violations = validate(model, &plan);
    if !violations.is_empty() {
        let summary = violations
            .iter()
            .take(4)
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(SolveError::Plan(PlanError::InfeasiblePlan {
            summary,
            violations,
        }));
    }
    let metrics = evaluate_plan_unchecked(model, &plan);
    Ok((plan, metrics))
}

/// Write a plan as a `name value` solution file (nonzero entries only),
/// importable by `import_solution`.
pub fn write_solution<T: Scalar>(
    model: &PlanModel<T>,
    plan: &AllocationPlan,
    header_comments: &[String],
    path: &Path,
) -> Result<(), SolveError> {
    use std::fmt::Write as _;
    let assignment = plan_assignment(model, plan);
    let mut out = String::new();
    for comment in header_comments {
        let _ = writeln!(out, "# {comment}");
    }
    for (index, variable) in model.variables.iter().enumerate() {
        if assignment[index] != T::zero() {
            let _ = writeln!(out, "{} {}", variable.name, assignment[index]);
        }
    }
    std::fs::write(path, out).map_err(|source| SolveError::Io {
        path: path.display().to_string(),
        source,
    })
}
