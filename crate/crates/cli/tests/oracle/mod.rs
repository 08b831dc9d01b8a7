//! Instance generator and brute-force enumerator shared by the acceptance
//! suite; mirrors the oracle in the core crate's tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use vaxsite_core::epi::priority_scores;
use vaxsite_core::grid::Grid;
use vaxsite_core::ingest::{CommuterMatrix, DistrictTable, SupplySchedule, TravelMatrix};
use vaxsite_core::plan::{build_p1, build_p2, AllocationPlan, PlanModel};
use vaxsite_core::travel::TravelModel;

/// Draw a complete small instance; costs are integer-valued so float sums
/// are exact and the two search paths must agree exactly.
pub fn random_instance(rng: &mut ChaCha8Rng) -> PlanModel<f64> {
    let n = rng.gen_range(2..=4usize);
    let horizon = rng.gen_range(1..=2usize);
    let k = rng.gen_range(1..=n);
    let with_commuters = rng.gen_bool(0.8);
    let multi_objective = rng.gen_bool(0.6);
    let lambda = if multi_objective && rng.gen_bool(0.7) { 10.0 } else { 0.0 };
    let lambda_eq = if multi_objective && rng.gen_bool(0.7) { 150.0 } else { 0.0 };

    // Populations <= 6 per district, small total so full enumeration stays
    // cheap.
    let mut populations: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=3u64)).collect();
    populations[rng.gen_range(0..n)] = rng.gen_range(3..=6);
    while populations.iter().sum::<u64>() > 10 {
        let u = rng.gen_range(0..n);
        if populations[u] > 0 {
            populations[u] -= 1;
        }
    }
    let table = DistrictTable::new(
        populations
            .iter()
            .enumerate()
            .map(|(i, &p)| (format!("d{i}"), p))
            .collect(),
    )
    .unwrap();

    let mut commuter_counts = Grid::filled(n, n, 0u64);
    if with_commuters {
        for u in 0..n {
            let mut budget = populations[u];
            for v in 0..n {
                if budget == 0 || rng.gen_bool(0.55) {
                    continue;
                }
                let count = rng.gen_range(0..=budget);
                commuter_counts.set(u, v, count);
                budget -= count;
            }
        }
    }
    let commuters = CommuterMatrix::new(commuter_counts, &table).unwrap();

    let mut costs = Grid::filled(n, n, 0.0f64);
    for u in 0..n {
        for v in 0..n {
            if u != v {
                costs.set(u, v, rng.gen_range(0..=20) as f64);
            }
        }
    }
    let travel = TravelModel::new(TravelMatrix::new(costs).unwrap());

    let mut supply = Grid::filled(horizon, n, 0u64);
    for t in 0..horizon {
        for w in 0..n {
            supply.set(t, w, rng.gen_range(0..=8));
        }
    }
    // Keep at least one dose so the model builds; feasibility is still up
    // to the draw.
    if supply.raw().iter().all(|&d| d == 0) {
        supply.set(0, 0, 1);
    }
    let equity_horizon = rng.gen_range(0..=horizon.min(2));
    let supply = SupplySchedule::new(supply, equity_horizon).unwrap();

    let model = if multi_objective {
        let targets: Vec<f64> = (0..n)
            .map(|_| [0.0, 0.25, 0.5, 0.75, 1.0][rng.gen_range(0..5)])
            .collect();
        // Scores need positive flow; fall back to a synthetic ring.
        let scores = if commuters.total_flow() > 0 {
            priority_scores(&commuters, horizon, 0.9).unwrap()
        } else {
            let ring_table = DistrictTable::new(
                (0..n).map(|i| (format!("d{i}"), 10u64)).collect(),
            )
            .unwrap();
            let mut ring = Grid::filled(n, n, 0u64);
            for u in 0..n {
                ring.set(u, (u + 1) % n, 1 + u as u64);
            }
            let ring = CommuterMatrix::new(ring, &ring_table).unwrap();
            priority_scores(&ring, horizon, 0.9).unwrap()
        };
        build_p2(
            &table, &commuters, &travel, &supply, k, &targets, &scores, lambda, lambda_eq,
        )
        .unwrap()
    } else {
        build_p1(&table, &commuters, &travel, &supply, k, with_commuters).unwrap()
    };
    model
}

/// Canonical objective, written independently of the library's metric code
/// but with the same term ordering so exact agreement is well-defined.
pub fn oracle_objective(model: &PlanModel<f64>, plan: &AllocationPlan) -> f64 {
    let n = model.meta.n;
    let horizon = model.meta.horizon;
    let mut travel = 0.0f64;
    for t in 0..horizon {
        for u in 0..n {
            for w in 0..n {
                travel += plan.y_at(t, u, w) as f64 * model.data.roundtrip.at(u, w);
            }
        }
    }
    if model.meta.include_commuters {
        for t in 0..horizon {
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        travel +=
                            plan.z_at(t, u, v, w) as f64 * model.data.commuter_minutes(u, v, w);
                    }
                }
            }
        }
    }
    let mut health = 0.0f64;
    if let (Some(targets), Some(delta)) = (&model.data.targets, &model.data.delta) {
        for t in 0..horizon {
            for u in 0..n {
                let goal = model.data.populations[u] as f64 * targets[u];
                let mut cumulative = 0u64;
                for t_prior in 0..=t {
                    let mut vax = 0u64;
                    for w in 0..n {
                        vax += plan.y_at(t_prior, u, w);
                    }
                    if model.meta.include_commuters {
                        for v in 0..n {
                            for w in 0..n {
                                vax += plan.z_at(t_prior, u, v, w);
                            }
                        }
                    }
                    cumulative += vax;
                }
                let gap = (goal - cumulative as f64).max(0.0);
                health += delta.at(t, u) * gap;
            }
        }
    }
    let mut inequity = 0.0f64;
    for t in 0..model.meta.equity_horizon {
        let mut lo = u64::MAX;
        let mut hi = 0u64;
        for u in 0..n {
            let mut vax = 0u64;
            for w in 0..n {
                vax += plan.y_at(t, u, w);
            }
            if model.meta.include_commuters {
                for v in 0..n {
                    for w in 0..n {
                        vax += plan.z_at(t, u, v, w);
                    }
                }
            }
            lo = lo.min(vax);
            hi = hi.max(vax);
        }
        inequity += (hi - lo) as f64;
    }
    travel + model.meta.lambda * health + model.meta.lambda_eq * inequity
}

struct BruteGroup {
    district: usize,
    workplace: Option<usize>,
    demand: u64,
}

/// Enumeration state threaded through the walk. Travel cost is accumulated
/// incrementally: with the generator's integer-valued minutes every partial
/// sum is an exactly representable integer, so the running total is
/// bit-identical to a canonical-order summation.
struct Walk<'m> {
    model: &'m PlanModel<f64>,
    groups: Vec<BruteGroup>,
    bins: Vec<(usize, usize)>,
    capacity: Vec<u64>,
    plan: AllocationPlan,
    travel: f64,
    /// Vaccinated per (district, period).
    vaccinated: Vec<Vec<u64>>,
    best: Option<(f64, AllocationPlan)>,
}

impl Walk<'_> {
    /// Penalty terms at a complete assignment, in the canonical (t, u)
    /// order so values match the library's metric evaluation bit-for-bit.
    fn leaf_objective(&self) -> f64 {
        let model = self.model;
        let n = model.meta.n;
        let mut health = 0.0f64;
        if let (Some(targets), Some(delta)) = (&model.data.targets, &model.data.delta) {
            for t in 0..model.meta.horizon {
                for u in 0..n {
                    let goal = model.data.populations[u] as f64 * targets[u];
                    let cumulative: u64 = (0..=t).map(|tp| self.vaccinated[u][tp]).sum();
                    let gap = (goal - cumulative as f64).max(0.0);
                    health += delta.at(t, u) * gap;
                }
            }
        }
        let mut inequity = 0.0f64;
        for t in 0..model.meta.equity_horizon {
            let mut lo = u64::MAX;
            let mut hi = 0u64;
            for u in 0..n {
                lo = lo.min(self.vaccinated[u][t]);
                hi = hi.max(self.vaccinated[u][t]);
            }
            inequity += (hi - lo) as f64;
        }
        self.travel + model.meta.lambda * health + model.meta.lambda_eq * inequity
    }

    fn group_cost(&self, group: &BruteGroup, w: usize) -> f64 {
        match group.workplace {
            None => self.model.data.roundtrip.at(group.district, w),
            Some(v) => self.model.data.commuter_minutes(group.district, v, w),
        }
    }

    fn walk(&mut self, group_index: usize) {
        if group_index == self.groups.len() {
            let objective = self.leaf_objective();
            let improves = match &self.best {
                Some((incumbent, _)) => objective < *incumbent,
                None => true,
            };
            if improves {
                self.best = Some((objective, self.plan.clone()));
            }
            return;
        }
        let demand = self.groups[group_index].demand;
        self.distribute(group_index, 0, demand);
    }

    fn distribute(&mut self, group_index: usize, bin_index: usize, left: u64) {
        if left == 0 {
            self.walk(group_index + 1);
            return;
        }
        if bin_index == self.bins.len() {
            return;
        }
        // Feasibility prune: remaining bins must hold what's left.
        let tail_capacity: u64 = self.capacity[bin_index..].iter().sum();
        if tail_capacity < left {
            return;
        }
        let (t, w) = self.bins[bin_index];
        let district = self.groups[group_index].district;
        let workplace = self.groups[group_index].workplace;
        let unit_cost = self.group_cost(&self.groups[group_index], w);
        let most = left.min(self.capacity[bin_index]);
        for take in (0..=most).rev() {
            if take > 0 {
                self.capacity[bin_index] -= take;
                self.travel += take as f64 * unit_cost;
                self.vaccinated[district][t] += take;
                match workplace {
                    None => {
                        let prev = self.plan.y_at(t, district, w);
                        self.plan.set_y(t, district, w, prev + take);
                    }
                    Some(v) => {
                        let prev = self.plan.z_at(t, district, v, w);
                        self.plan.set_z(t, district, v, w, prev + take);
                    }
                }
            }
            self.distribute(group_index, bin_index + 1, left - take);
            if take > 0 {
                self.capacity[bin_index] += take;
                self.travel -= take as f64 * unit_cost;
                self.vaccinated[district][t] -= take;
                match workplace {
                    None => {
                        let prev = self.plan.y_at(t, district, w);
                        self.plan.set_y(t, district, w, prev - take);
                    }
                    Some(v) => {
                        let prev = self.plan.z_at(t, district, v, w);
                        self.plan.set_z(t, district, v, w, prev - take);
                    }
                }
            }
        }
    }
}

/// Enumerate every integer allocation over every admissible site subset.
/// Only capacity feasibility prunes the walk; the optimum and its objective
/// are exact by construction.
pub fn brute_force_optimum(model: &PlanModel<f64>) -> Option<(f64, AllocationPlan)> {
    let n = model.meta.n;
    let horizon = model.meta.horizon;
    let k = model.meta.k;

    let mut groups = Vec::new();
    for u in 0..n {
        let demand = model.data.noncommuter_demand(u);
        if demand > 0 {
            groups.push(BruteGroup {
                district: u,
                workplace: None,
                demand,
            });
        }
        if model.meta.include_commuters {
            for v in 0..n {
                let demand = model.data.commuters.at(u, v);
                if demand > 0 {
                    groups.push(BruteGroup {
                        district: u,
                        workplace: Some(v),
                        demand,
                    });
                }
            }
        }
    }
    let total_demand: u64 = groups.iter().map(|g| g.demand).sum();

    let mut best: Option<(f64, AllocationPlan)> = None;
    // All site subsets of size 0..=k, in lexicographic order of the open
    // vector.
    for mask in 0u32..(1 << n) {
        let sites: Vec<usize> = (0..n).filter(|&w| mask & (1 << w) != 0).collect();
        if sites.len() > k {
            continue;
        }
        if let Some(fixed) = &model.data.fixed_sites {
            if &sites != fixed {
                continue;
            }
        }
        let bins: Vec<(usize, usize)> = (0..horizon)
            .flat_map(|t| sites.iter().map(move |&w| (t, w)))
            .collect();
        let capacity: Vec<u64> = bins
            .iter()
            .map(|&(t, w)| model.data.supply.at(t, w))
            .collect();
        if capacity.iter().sum::<u64>() < total_demand {
            continue;
        }
        let mut plan = AllocationPlan::zero(n, horizon, model.meta.include_commuters);
        for &w in &sites {
            plan.open[w] = true;
        }
        let mut walk = Walk {
            model,
            groups: std::mem::take(&mut groups),
            bins,
            capacity,
            plan,
            travel: 0.0,
            vaccinated: vec![vec![0; horizon]; n],
            best: best.take(),
        };
        walk.walk(0);
        best = walk.best.take();
        groups = walk.groups;
    }
    // Spot-check the incremental bookkeeping against the straightforward
    // full evaluation at the winner.
    if let Some((objective, plan)) = &best {
        assert_eq!(*objective, oracle_objective(model, plan));
    }
    best
}

