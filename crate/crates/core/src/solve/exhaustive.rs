//! Exact solver for desk-scale instances.
//!
//! Site subsets are enumerated outright. Within a subset, the pure travel
//! problem is a transportation problem (demand groups against site-period
//! bins) solved by min-cost flow, which is integral. With shortfall or
//! equity weights active, the solver branches over each demand group's
//! split across periods: the penalty terms depend only on per-district
//! per-period totals, so fixing the splits makes the penalty exact while
//! the travel part stays a flow problem. Bounds combine the exact flow
//! relaxation with an admissible penalty lower bound.
//!
//! Reported objectives always come from the canonical plan evaluation, so
//! results are comparable bit-for-bit with any other enumerator that scores
//! plans the same way.

use std::time::Instant;

use crate::plan::{evaluate_plan_unchecked, AllocationPlan, PlanMetrics, PlanModel};
use crate::scalar::Scalar;

use super::flow::FlowNetwork;
use super::{SolveError, SolveLimits, SolveReport, SolveStatus};

#[derive(Debug, Clone)]
struct Group<T> {
    district: usize,
    /// Workplace for commuter groups, `None` for the non-commuter pool.
    workplace: Option<usize>,
    demand: u64,
    /// Minutes per open-site slot.
    costs: Vec<T>,
}

struct Incumbent<T> {
    objective: T,
    plan: AllocationPlan,
    metrics: PlanMetrics<T>,
}

struct SubsetSolver<'m, T> {
    model: &'m PlanModel<T>,
    sites: Vec<usize>,
    groups: Vec<Group<T>>,
    total_demand: u64,
    horizon: usize,
    /// Fixed per-period splits for groups `0..assigned`.
    splits: Vec<Vec<u64>>,
    assigned: usize,
    /// Assigned vaccination totals per `(district, period)`.
    district_period: Vec<Vec<u64>>,
    /// Demand of still-unassigned groups per district.
    unassigned: Vec<u64>,
    /// Assigned totals per period, for the quick capacity prune.
    period_assigned: Vec<u64>,
    period_capacity: Vec<u64>,
    /// Shortfall credit earned by vaccinating one person of district `u`
    /// in period `s`: lambda times the priority weight summed over the
    /// periods whose cumulative count it raises. Dropping the shortfall
    /// clamp makes the health term linear in these credits, which yields
    /// an admissible flow-embedded bound.
    credit: Vec<Vec<T>>,
    /// Health term of the all-zero allocation (every shortfall whole).
    health_const: T,
    incumbent: Option<Incumbent<T>>,
    nodes: u64,
    deadline: Instant,
}

/// Flow solution summary: travel cost plus per `(group, period, slot)` counts.
struct FlowSolution<T> {
    travel: T,
    counts: Vec<(usize, usize, usize, u64)>,
}

impl<'m, T: Scalar> SubsetSolver<'m, T> {
    fn new(model: &'m PlanModel<T>, sites: Vec<usize>, deadline: Instant) -> Self {
        let n = model.meta.n;
        let horizon = model.meta.horizon;
        let mut groups = Vec::new();
        for u in 0..n {
            let demand = model.data.noncommuter_demand(u);
            if demand > 0 {
                let costs = sites.iter().map(|&w| model.data.roundtrip.at(u, w)).collect();
                groups.push(Group {
                    district: u,
                    workplace: None,
                    demand,
                    costs,
                });
            }
            if model.meta.include_commuters {
                for v in 0..n {
                    let demand = model.data.commuters.at(u, v);
                    if demand > 0 {
                        let costs = sites
                            .iter()
                            .map(|&w| model.data.commuter_minutes(u, v, w))
                            .collect();
                        groups.push(Group {
                            district: u,
                            workplace: Some(v),
                            demand,
                            costs,
                        });
                    }
                }
            }
        }
        let total_demand = groups.iter().map(|g| g.demand).sum();
        let period_capacity = (0..horizon)
            .map(|t| sites.iter().map(|&w| model.data.supply.at(t, w)).sum())
            .collect();
        let mut unassigned = vec![0u64; n];
        for group in &groups {
            unassigned[group.district] += group.demand;
        }
        let mut credit = vec![vec![T::zero(); horizon]; n];
        let mut health_const = T::zero();
        if model.meta.lambda > T::zero() {
            if let (Some(targets), Some(delta)) = (&model.data.targets, &model.data.delta) {
                for u in 0..n {
                    let goal = T::from_count(model.data.populations[u]) * targets[u];
                    for t in 0..horizon {
                        health_const += model.meta.lambda * delta.at(t, u) * goal;
                        for s in 0..=t {
                            credit[u][s] += model.meta.lambda * delta.at(t, u);
                        }
                    }
                }
            }
        }
        let n_groups = groups.len();
        Self {
            model,
            sites,
            groups,
            total_demand,
            horizon,
            splits: vec![vec![0; horizon]; n_groups],
            assigned: 0,
            district_period: vec![vec![0; horizon]; n],
            unassigned,
            period_assigned: vec![0; horizon],
            period_capacity,
            credit,
            health_const,
            incumbent: None,
            nodes: 0,
            deadline,
        }
    }

    fn has_penalties(&self) -> bool {
        let meta = &self.model.meta;
        let lambda_active = meta.lambda > T::zero() && self.model.data.delta.is_some();
        let eq_active = meta.lambda_eq > T::zero() && meta.equity_horizon > 0;
        lambda_active || eq_active
    }

    /// Min-cost completion: assigned groups supply per-period amounts into
    /// that period's bins, unassigned groups supply their whole demand into
    /// any bin. With `with_credits` the linearized shortfall credit is
    /// subtracted from each arc, embedding the health incentive in the
    /// relaxation. Returns `None` when demand cannot be routed.
    fn flow_relaxation(&self, with_credits: bool) -> Option<FlowSolution<T>> {
        let m = self.sites.len();
        let n_groups = self.groups.len();
        let source = 0usize;
        let period_node = |g: usize, t: usize| 1 + g * self.horizon + t;
        let whole_node = |g: usize| 1 + n_groups * self.horizon + g;
        let bin_node =
            |t: usize, slot: usize| 1 + n_groups * self.horizon + n_groups + t * m + slot;
        let sink = 1 + n_groups * self.horizon + n_groups + self.horizon * m;
        let mut net: FlowNetwork<T> = FlowNetwork::new(sink + 1);
        let mut tracked: Vec<(usize, usize, usize, usize)> = Vec::new();

        for (g, group) in self.groups.iter().enumerate() {
            let arc_cost = |t: usize, slot: usize| {
                if with_credits {
                    group.costs[slot] - self.credit[group.district][t]
                } else {
                    group.costs[slot]
                }
            };
            if g < self.assigned {
                for t in 0..self.horizon {
                    let amount = self.splits[g][t];
                    if amount > 0 {
                        net.add_edge(source, period_node(g, t), amount as i64, T::zero());
                        for slot in 0..m {
                            let edge = net.add_edge(
                                period_node(g, t),
                                bin_node(t, slot),
                                amount as i64,
                                arc_cost(t, slot),
                            );
                            tracked.push((g, t, slot, edge));
                        }
                    }
                }
            } else {
                net.add_edge(source, whole_node(g), group.demand as i64, T::zero());
                for t in 0..self.horizon {
                    for slot in 0..m {
                        let edge = net.add_edge(
                            whole_node(g),
                            bin_node(t, slot),
                            group.demand as i64,
                            arc_cost(t, slot),
                        );
                        tracked.push((g, t, slot, edge));
                    }
                }
            }
        }
        for t in 0..self.horizon {
            for (slot, &site) in self.sites.iter().enumerate() {
                let capacity = self.model.data.supply.at(t, site) as i64;
                if capacity > 0 {
                    net.add_edge(bin_node(t, slot), sink, capacity, T::zero());
                }
            }
        }
        let (flow, travel) = net.min_cost_max_flow(source, sink);
        if flow != self.total_demand as i64 {
            return None;
        }
        let counts = tracked
            .into_iter()
            .filter_map(|(g, t, slot, edge)| {
                let units = net.flow_on(edge);
                (units > 0).then_some((g, t, slot, units as u64))
            })
            .collect();
        Some(FlowSolution { travel, counts })
    }

    /// Admissible lower bound on the penalty terms given the current
    /// partial assignment.
    fn penalty_lower_bound(&self) -> T {
        let meta = &self.model.meta;
        let n = meta.n;
        let mut bound = T::zero();
        if meta.lambda > T::zero() {
            if let (Some(targets), Some(delta)) = (&self.model.data.targets, &self.model.data.delta)
            {
                let mut health = T::zero();
                for u in 0..n {
                    let goal = T::from_count(self.model.data.populations[u]) * targets[u];
                    let mut cumulative_ub = self.unassigned[u];
                    for t in 0..self.horizon {
                        cumulative_ub += self.district_period[u][t];
                        let gap = (goal - T::from_count(cumulative_ub)).max(T::zero());
                        health += delta.at(t, u) * gap;
                    }
                }
                bound += meta.lambda * health;
            }
        }
        if meta.lambda_eq > T::zero() {
            bound += meta.lambda_eq * self.equity_lower_bound();
        }
        bound
    }

    /// Equity spread bound from the per-district interval
    /// `[assigned, assigned + unassigned]` of possible final counts.
    fn equity_lower_bound(&self) -> T {
        let n = self.model.meta.n;
        let mut spread_total = T::zero();
        for t in 0..self.model.meta.equity_horizon {
            let mut max_floor = 0u64;
            let mut min_ceiling = u64::MAX;
            for u in 0..n {
                let floor = self.district_period[u][t];
                let ceiling = floor + self.unassigned[u];
                max_floor = max_floor.max(floor);
                min_ceiling = min_ceiling.min(ceiling);
            }
            if max_floor > min_ceiling {
                spread_total += T::from_count(max_floor - min_ceiling);
            }
        }
        spread_total
    }

    /// Assemble a complete plan from a flow solution.
    fn plan_from_flow(&self, solution: &FlowSolution<T>) -> AllocationPlan {
        let meta = &self.model.meta;
        let mut plan = AllocationPlan::zero(meta.n, meta.horizon, meta.include_commuters);
        for &site in &self.sites {
            plan.open[site] = true;
        }
        for &(g, t, slot, units) in &solution.counts {
            let group = &self.groups[g];
            let w = self.sites[slot];
            match group.workplace {
                None => {
                    let prev = plan.y_at(t, group.district, w);
                    plan.set_y(t, group.district, w, prev + units);
                }
                Some(v) => {
                    let prev = plan.z_at(t, group.district, v, w);
                    plan.set_z(t, group.district, v, w, prev + units);
                }
            }
        }
        plan
    }

    fn offer_incumbent(&mut self, solution: &FlowSolution<T>) {
        let plan = self.plan_from_flow(solution);
        let metrics = evaluate_plan_unchecked(self.model, &plan);
        let objective = metrics.composite;
        let better = match &self.incumbent {
            Some(best) => objective < best.objective,
            None => true,
        };
        if better {
            self.incumbent = Some(Incumbent {
                objective,
                plan,
                metrics,
            });
        }
    }

    fn solve(mut self) -> Result<Option<(Incumbent<T>, u64)>, SolveError> {
        let Some(root) = self.flow_relaxation(false) else {
            return Ok(None);
        };
        self.nodes += 1;
        self.offer_incumbent(&root);
        if self.has_penalties() {
            self.probe_balanced();
            self.search(0)?;
        }
        let nodes = self.nodes;
        Ok(self.incumbent.take().map(|best| (best, nodes)))
    }

    /// Probe incumbent for equity-heavy objectives: spread every group as
    /// evenly as possible across periods, then route at minimum travel
    /// cost. Failure just means no extra incumbent.
    fn probe_balanced(&mut self) {
        let horizon = self.horizon as u64;
        for g in 0..self.groups.len() {
            let demand = self.groups[g].demand;
            let base = demand / horizon;
            let extra = (demand % horizon) as usize;
            for t in 0..self.horizon {
                self.splits[g][t] = base + u64::from(t < extra);
            }
        }
        self.assigned = self.groups.len();
        if let Some(balanced) = self.flow_relaxation(false) {
            self.offer_incumbent(&balanced);
        }
        self.assigned = 0;
        for split in &mut self.splits {
            split.iter_mut().for_each(|x| *x = 0);
        }
    }

    fn search(&mut self, group: usize) -> Result<(), SolveError> {
        self.nodes += 1;
        if self.nodes % 256 == 0 && Instant::now() > self.deadline {
            return Err(SolveError::TimeBudget);
        }
        let Some(plain) = self.flow_relaxation(false) else {
            return Ok(());
        };
        // Two admissible bounds: the plain travel relaxation plus the
        // clamp-aware penalty floor, and the credit flow plus the linear
        // health constant. Each relaxation's completion is also a feasible
        // plan, so both feed the incumbent.
        let mut bound = plain.travel + self.penalty_lower_bound();
        self.offer_incumbent(&plain);
        let use_credits = self.model.meta.lambda > T::zero() && self.model.data.delta.is_some();
        if use_credits {
            let Some(credited) = self.flow_relaxation(true) else {
                return Ok(());
            };
            let mut credit_bound = credited.travel + self.health_const;
            if self.model.meta.lambda_eq > T::zero() {
                credit_bound += self.model.meta.lambda_eq * self.equity_lower_bound();
            }
            bound = bound.max(credit_bound);
            self.offer_incumbent(&credited);
        }
        if let Some(best) = &self.incumbent {
            let margin = T::from_f64_c(1e-9) * (T::one() + best.objective.abs());
            if bound >= best.objective + margin {
                return Ok(());
            }
        }
        if group == self.groups.len() {
            return Ok(());
        }
        // Enumerate the group's split across periods, front-loaded first so
        // low-shortfall incumbents appear early.
        let demand = self.groups[group].demand;
        let mut split = vec![0u64; self.horizon];
        self.enumerate_splits(group, 0, demand, &mut split)
    }

    fn enumerate_splits(
        &mut self,
        group: usize,
        period: usize,
        left: u64,
        split: &mut Vec<u64>,
    ) -> Result<(), SolveError> {
        if period + 1 == self.horizon {
            split[period] = left;
            return self.descend(group, split.clone());
        }
        let mut amount = left as i64;
        while amount >= 0 {
            split[period] = amount as u64;
            self.enumerate_splits(group, period + 1, left - amount as u64, split)?;
            amount -= 1;
        }
        split[period] = 0;
        Ok(())
    }

    fn descend(&mut self, group: usize, split: Vec<u64>) -> Result<(), SolveError> {
        // Quick capacity prune: assigned totals cannot exceed a period's
        // aggregate capacity.
        let district = self.groups[group].district;
        for t in 0..self.horizon {
            if self.period_assigned[t] + split[t] > self.period_capacity[t] {
                return Ok(());
            }
        }
        for t in 0..self.horizon {
            self.period_assigned[t] += split[t];
            self.district_period[district][t] += split[t];
        }
        self.unassigned[district] -= self.groups[group].demand;
        self.splits[group] = split.clone();
        self.assigned = group + 1;

        let result = self.search(group + 1);

        self.assigned = group;
        self.unassigned[district] += self.groups[group].demand;
        for t in 0..self.horizon {
            self.period_assigned[t] -= split[t];
            self.district_period[district][t] -= split[t];
        }
        result
    }
}

/// Enumerate lexicographic `r`-combinations of `0..pool`.
fn combinations(pool: usize, r: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = if r <= pool {
        Some((0..r).collect())
    } else {
        None
    };
    std::iter::from_fn(move || {
        let result = current.clone()?;
        // Advance.
        let combo = current.as_mut().unwrap();
        let mut i = r;
        loop {
            if i == 0 {
                current = None;
                break;
            }
            i -= 1;
            if combo[i] + 1 <= pool - (r - i) {
                combo[i] += 1;
                for j in i + 1..r {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
        Some(result)
    })
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result = 1u64;
    for i in 0..k {
        result = result.saturating_mul(n - i) / (i + 1);
    }
    result
}

/// Enumerate site subsets, solve each fixed-site subproblem exactly, and
/// return the global optimum with lexicographic tie-breaking on the site
/// set.
pub fn solve_exhaustive<T: Scalar>(
    model: &PlanModel<T>,
    limits: &SolveLimits,
) -> Result<SolveReport<T>, SolveError> {
    let start = Instant::now();
    let deadline = start + limits.time_budget;
    let n = model.meta.n;

    let mut pinned_open = Vec::new();
    let mut free = Vec::new();
    for u in 0..n {
        match model.variables[u].fixed_value() {
            Some(value) if value == T::one() => pinned_open.push(u),
            Some(_) => {}
            None => free.push(u),
        }
    }
    if pinned_open.len() > model.meta.k {
        return Ok(SolveReport::infeasible(0, start.elapsed().as_secs_f64()));
    }
    // Extra open sites never hurt (opening is free), so only maximal-size
    // subsets need enumeration.
    let choose = model.meta.k.min(pinned_open.len() + free.len()) - pinned_open.len();
    let subset_count = binomial(free.len() as u64, choose as u64);
    if subset_count > limits.max_subsets {
        return Err(SolveError::TooLarge {
            subsets: subset_count,
            limit: limits.max_subsets,
        });
    }

    let mut best: Option<(Incumbent<T>, Vec<usize>)> = None;
    let mut subsets_tried = 0u64;
    let mut nodes_total = 0u64;
    for combo in combinations(free.len(), choose) {
        subsets_tried += 1;
        let mut sites = pinned_open.clone();
        sites.extend(combo.iter().map(|&i| free[i]));
        sites.sort_unstable();
        let solver = SubsetSolver::new(model, sites.clone(), deadline);
        if let Some((incumbent, nodes)) = solver.solve()? {
            nodes_total += nodes;
            let better = match &best {
                Some((current, _)) => incumbent.objective < current.objective,
                None => true,
            };
            if better {
                best = Some((incumbent, sites));
            }
        }
    }

    let wall = start.elapsed().as_secs_f64();
    match best {
        Some((incumbent, _)) => Ok(SolveReport {
            status: SolveStatus::Optimal,
            plan: Some(incumbent.plan),
            objective: Some(incumbent.objective),
            metrics: Some(incumbent.metrics),
            gap: T::zero(),
            nodes_or_subsets: subsets_tried + nodes_total,
            wall_time_secs: wall,
        }),
        None => Ok(SolveReport::infeasible(subsets_tried, wall)),
    }
}
