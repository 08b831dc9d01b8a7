//! Allocation plans and their derived metrics.
//!
//! `evaluate_plan` is the canonical objective: travel minutes accumulated in
//! `(t, u, w)` then `(t, u, v, w)` index order, the weighted shortfall term
//! in `(t, u)` order, and the per-period vaccination spread summed over the
//! equity horizon. Solvers report objectives through this one code path so
//! that independently computed optima compare bit-for-bit.

use crate::grid::Grid;
use crate::scalar::Scalar;

use super::model::PlanModel;
use super::PlanError;

/// Constraint families, named after their role in the formulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintFamily {
    /// 1a: site budget.
    SiteLimit,
    /// 1b: non-commuter demand satisfaction.
    NoncommuterDemand,
    /// 1c: commuter demand satisfaction.
    CommuterDemand,
    /// 1d: non-commuter assignments only at open sites.
    LinkNoncommuter,
    /// 1e: commuter assignments only at open sites.
    LinkCommuter,
    /// 1f: site-period capacity.
    Capacity,
    /// 2g: shortfall versus the vaccination target.
    Shortfall,
    /// 2h: per-period equity spread.
    Equity,
    /// Pinned variable bounds.
    Bounds,
}

impl ConstraintFamily {
    pub fn from_row_name(name: &str) -> Option<Self> {
        let prefix = name.split('_').next()?;
        Some(match prefix {
            "SITES" => Self::SiteLimit,
            "DEMN" => Self::NoncommuterDemand,
            "DEMC" => Self::CommuterDemand,
            "LNKY" => Self::LinkNoncommuter,
            "LNKZ" => Self::LinkCommuter,
            "CAP" => Self::Capacity,
            "SHORT" => Self::Shortfall,
            "EQ" => Self::Equity,
            _ => return None,
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::SiteLimit => "1a site budget",
            Self::NoncommuterDemand => "1b non-commuter demand",
            Self::CommuterDemand => "1c commuter demand",
            Self::LinkNoncommuter => "1d open-site linking (y)",
            Self::LinkCommuter => "1e open-site linking (z)",
            Self::Capacity => "1f site-period capacity",
            Self::Shortfall => "2g shortfall",
            Self::Equity => "2h equity spread",
            Self::Bounds => "variable bounds",
        }
    }
}

/// One violated constraint with its signed slack (negative means violated
/// by that amount).
#[derive(Debug, Clone)]
pub struct Violation {
    pub family: ConstraintFamily,
    pub row: String,
    pub slack: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} [{}] slack {:.6}",
            self.row,
            self.family.label(),
            self.slack
        )
    }
}

/// A candidate solution: which sites open and who goes where, when.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationPlan {
    /// Site open flags, one per district.
    pub open: Vec<bool>,
    /// Non-commuter assignments, flattened `(t, u, w)`.
    pub y: Vec<u64>,
    /// Commuter assignments, flattened `(t, u, v, w)`; empty when the model
    /// excludes commuters.
    pub z: Vec<u64>,
    pub n: usize,
    pub horizon: usize,
}

impl AllocationPlan {
    pub fn zero(n: usize, horizon: usize, with_commuters: bool) -> Self {
        Self {
            open: vec![false; n],
            y: vec![0; horizon * n * n],
            z: if with_commuters {
                vec![0; horizon * n * n * n]
            } else {
                Vec::new()
            },
            n,
            horizon,
        }
    }

    #[inline]
    pub fn y_at(&self, t: usize, u: usize, w: usize) -> u64 {
        self.y[(t * self.n + u) * self.n + w]
    }

    #[inline]
    pub fn set_y(&mut self, t: usize, u: usize, w: usize, value: u64) {
        self.y[(t * self.n + u) * self.n + w] = value;
    }

    #[inline]
    pub fn z_at(&self, t: usize, u: usize, v: usize, w: usize) -> u64 {
        self.z[((t * self.n + u) * self.n + v) * self.n + w]
    }

    #[inline]
    pub fn set_z(&mut self, t: usize, u: usize, v: usize, w: usize, value: u64) {
        self.z[((t * self.n + u) * self.n + v) * self.n + w] = value;
    }

    pub fn has_commuters(&self) -> bool {
        !self.z.is_empty()
    }

    pub fn open_sites(&self) -> Vec<usize> {
        self.open
            .iter()
            .enumerate()
            .filter_map(|(w, &open)| open.then_some(w))
            .collect()
    }

    /// People of district `u` vaccinated in period `t`.
    pub fn vaccinated(&self, t: usize, u: usize) -> u64 {
        let mut total = 0;
        for w in 0..self.n {
            total += self.y_at(t, u, w);
        }
        if self.has_commuters() {
            for v in 0..self.n {
                for w in 0..self.n {
                    total += self.z_at(t, u, v, w);
                }
            }
        }
        total
    }

    /// People of district `u` vaccinated in periods `0..=t`.
    pub fn cumulative_vaccinated(&self, t: usize, u: usize) -> u64 {
        (0..=t).map(|t_prior| self.vaccinated(t_prior, u)).sum()
    }

    /// Doses delivered at site `w` in period `t`.
    pub fn site_load(&self, t: usize, w: usize) -> u64 {
        let mut total = 0;
        for u in 0..self.n {
            total += self.y_at(t, u, w);
        }
        if self.has_commuters() {
            for u in 0..self.n {
                for v in 0..self.n {
                    total += self.z_at(t, u, v, w);
                }
            }
        }
        total
    }
}

/// Metric record derived from a plan under a model's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanMetrics<T> {
    pub travel_minutes: T,
    /// Weighted shortfall term (before multiplying by lambda).
    pub health_term: T,
    /// Sum over the equity horizon of the per-period vaccination spread.
    pub inequity: T,
    /// travel + lambda * health + lambda_eq * inequity.
    pub composite: T,
    /// Shortfall below target per `(t, u)`.
    pub shortfall: Grid<T>,
}

/// Check the structural plan invariants directly against the model data.
///
/// This is intentionally a separate code path from `solve::validate`, which
/// walks the generated constraint rows; the two must agree.
pub fn check_plan<T: Scalar>(model: &PlanModel<T>, plan: &AllocationPlan) -> Vec<Violation> {
    let n = model.meta.n;
    let horizon = model.meta.horizon;
    let mut violations = Vec::new();
    if plan.n != n || plan.horizon != horizon || plan.has_commuters() != model.meta.include_commuters
    {
        violations.push(Violation {
            family: ConstraintFamily::Bounds,
            row: "SHAPE".into(),
            slack: f64::NEG_INFINITY,
        });
        return violations;
    }

    let open_count = plan.open.iter().filter(|&&o| o).count();
    if open_count > model.meta.k {
        violations.push(Violation {
            family: ConstraintFamily::SiteLimit,
            row: "SITES".into(),
            slack: model.meta.k as f64 - open_count as f64,
        });
    }
    if let Some(fixed) = &model.data.fixed_sites {
        for u in 0..n {
            let pinned = fixed.contains(&u);
            if plan.open[u] != pinned {
                violations.push(Violation {
                    family: ConstraintFamily::Bounds,
                    row: format!("X_{u:02}"),
                    slack: -1.0,
                });
            }
        }
    }
    for u in 0..n {
        let want = model.data.noncommuter_demand(u);
        let got: u64 = (0..horizon).map(|t| (0..n).map(|w| plan.y_at(t, u, w)).sum::<u64>()).sum();
        if got != want {
            violations.push(Violation {
                family: ConstraintFamily::NoncommuterDemand,
                row: format!("DEMN_{u:02}"),
                slack: got as f64 - want as f64,
            });
        }
    }
    if model.meta.include_commuters {
        for u in 0..n {
            for v in 0..n {
                let want = model.data.commuters.at(u, v);
                let got: u64 = (0..horizon)
                    .map(|t| (0..n).map(|w| plan.z_at(t, u, v, w)).sum::<u64>())
                    .sum();
                if got != want {
                    violations.push(Violation {
                        family: ConstraintFamily::CommuterDemand,
                        row: format!("DEMC_{u:02}_{v:02}"),
                        slack: got as f64 - want as f64,
                    });
                }
            }
        }
    }
    for t in 0..horizon {
        for w in 0..n {
            let load = plan.site_load(t, w);
            if load > 0 && !plan.open[w] {
                let family = if (0..n).any(|u| plan.y_at(t, u, w) > 0) {
                    ConstraintFamily::LinkNoncommuter
                } else {
                    ConstraintFamily::LinkCommuter
                };
                violations.push(Violation {
                    family,
                    row: format!("LNK_{t:02}_{w:02}"),
                    slack: -(load as f64),
                });
            }
            let cap = model.data.supply.at(t, w);
            if load > cap {
                violations.push(Violation {
                    family: ConstraintFamily::Capacity,
                    row: format!("CAP_{t:02}_{w:02}"),
                    slack: cap as f64 - load as f64,
                });
            }
        }
    }
    violations
}

/// Canonical metric evaluation; rejects structurally infeasible plans.
pub fn evaluate_plan<T: Scalar>(
    model: &PlanModel<T>,
    plan: &AllocationPlan,
) -> Result<PlanMetrics<T>, PlanError> {
    let violations = check_plan(model, plan);
    if !violations.is_empty() {
        let summary = violations
            .iter()
            .take(4)
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(PlanError::InfeasiblePlan {
            summary,
            violations,
        });
    }
    Ok(evaluate_plan_unchecked(model, plan))
}

/// Metric evaluation without the feasibility gate; used by solvers on plans
/// they construct.
pub fn evaluate_plan_unchecked<T: Scalar>(
    model: &PlanModel<T>,
    plan: &AllocationPlan,
) -> PlanMetrics<T> {
    let n = model.meta.n;
    let horizon = model.meta.horizon;

    let mut travel = T::zero();
    for t in 0..horizon {
        for u in 0..n {
            for w in 0..n {
                let count = plan.y_at(t, u, w);
                if count > 0 {
                    travel += T::from_count(count) * model.data.roundtrip.at(u, w);
                }
            }
        }
    }
    if model.meta.include_commuters {
        for t in 0..horizon {
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        let count = plan.z_at(t, u, v, w);
                        if count > 0 {
                            travel += T::from_count(count) * model.data.commuter_minutes(u, v, w);
                        }
                    }
                }
            }
        }
    }

    let mut shortfall = Grid::filled(horizon, n, T::zero());
    let mut health = T::zero();
    if let (Some(targets), Some(delta)) = (&model.data.targets, &model.data.delta) {
        for t in 0..horizon {
            for u in 0..n {
                let goal = T::from_count(model.data.populations[u]) * targets[u];
                let cum = T::from_count(plan.cumulative_vaccinated(t, u));
                let gap = (goal - cum).max(T::zero());
                shortfall.set(t, u, gap);
                health += delta.at(t, u) * gap;
            }
        }
    }

    let mut inequity = T::zero();
    for t in 0..model.meta.equity_horizon {
        let mut lo = u64::MAX;
        let mut hi = 0u64;
        for u in 0..n {
            let vax = plan.vaccinated(t, u);
            lo = lo.min(vax);
            hi = hi.max(vax);
        }
        if n > 0 {
            inequity += T::from_count(hi - lo);
        }
    }

    let composite = travel + model.meta.lambda * health + model.meta.lambda_eq * inequity;
    PlanMetrics {
        travel_minutes: travel,
        health_term: health,
        inequity,
        composite,
        shortfall,
    }
}

/// Re-cost a non-commuter plan as if its assignees were the true commuter
/// mix: each district's site-period assignments are split across that
/// district's groups (non-commuters first, then commuter groups by
/// workplace) and charged the group's own minutes.
pub fn evaluate_under_commuter_costs<T: Scalar>(
    p0_plan: &AllocationPlan,
    commuter_model: &PlanModel<T>,
) -> Result<T, PlanError> {
    let n = commuter_model.meta.n;
    let horizon = commuter_model.meta.horizon;
    if p0_plan.n != n || p0_plan.horizon != horizon {
        return Err(PlanError::DimensionMismatch(
            "plan and model shapes differ".into(),
        ));
    }
    let data = &commuter_model.data;
    let mut total = T::zero();
    for u in 0..n {
        // Remaining group demands: slot 0 is the non-commuter pool, slot
        // 1 + v the commuters working in v.
        let mut remaining: Vec<u64> = Vec::with_capacity(n + 1);
        remaining.push(data.noncommuter_demand(u));
        for v in 0..n {
            remaining.push(data.commuters.at(u, v));
        }
        for t in 0..horizon {
            for w in 0..n {
                let mut count = p0_plan.y_at(t, u, w);
                let mut slot = 0;
                while count > 0 && slot < remaining.len() {
                    let take = count.min(remaining[slot]);
                    if take > 0 {
                        let minutes = if slot == 0 {
                            data.roundtrip.at(u, w)
                        } else {
                            data.commuter_minutes(u, slot - 1, w)
                        };
                        total += T::from_count(take) * minutes;
                        remaining[slot] -= take;
                        count -= take;
                    } else {
                        slot += 1;
                    }
                }
                if count > 0 {
                    return Err(PlanError::DimensionMismatch(format!(
                        "plan assigns more people than district {u} holds"
                    )));
                }
            }
        }
    }
    Ok(total)
}
