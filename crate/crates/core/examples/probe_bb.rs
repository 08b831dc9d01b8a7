// probe: per-case timing of the exhaustive solver on oracle instances
use std::time::Instant;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vaxsite_core::epi::priority_scores;
use vaxsite_core::grid::Grid;
use vaxsite_core::ingest::{CommuterMatrix, DistrictTable, SupplySchedule, TravelMatrix};
use vaxsite_core::plan::{build_p1, build_p2, PlanModel};
use vaxsite_core::solve::{solve_exhaustive, SolveLimits};
use vaxsite_core::travel::TravelModel;

fn random_instance(rng: &mut ChaCha8Rng) -> PlanModel<f64> {
    let n = rng.gen_range(2..=4usize);
    let horizon = rng.gen_range(1..=2usize);
    let k = rng.gen_range(1..=n);
    let with_commuters = rng.gen_bool(0.8);
    let multi_objective = rng.gen_bool(0.6);
    let lambda = if multi_objective && rng.gen_bool(0.7) { 10.0 } else { 0.0 };
    let lambda_eq = if multi_objective && rng.gen_bool(0.7) { 150.0 } else { 0.0 };
    let mut populations: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=3u64)).collect();
    populations[rng.gen_range(0..n)] = rng.gen_range(3..=6);
    while populations.iter().sum::<u64>() > 10 {
        let u = rng.gen_range(0..n);
        if populations[u] > 0 { populations[u] -= 1; }
    }
    let table = DistrictTable::new(
        populations.iter().enumerate().map(|(i, &p)| (format!("d{i}"), p)).collect(),
    ).unwrap();
    let mut commuter_counts = Grid::filled(n, n, 0u64);
    if with_commuters {
        for u in 0..n {
            let mut budget = populations[u];
            for v in 0..n {
                if budget == 0 || rng.gen_bool(0.55) { continue; }
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
            if u != v { costs.set(u, v, rng.gen_range(0..=20) as f64); }
        }
    }
    let travel = TravelModel::new(TravelMatrix::new(costs).unwrap());
    let mut supply = Grid::filled(horizon, n, 0u64);
    for t in 0..horizon {
        for w in 0..n {
            supply.set(t, w, rng.gen_range(0..=8));
        }
    }
    if supply.raw().iter().all(|&d| d == 0) { supply.set(0, 0, 1); }
    let equity_horizon = rng.gen_range(0..=horizon.min(2));
    let supply = SupplySchedule::new(supply, equity_horizon).unwrap();
    if multi_objective {
        let targets: Vec<f64> =
            (0..n).map(|_| [0.0, 0.25, 0.5, 0.75, 1.0][rng.gen_range(0..5)]).collect();
        let scores = if commuters.total_flow() > 0 {
            priority_scores(&commuters, horizon, 0.9).unwrap()
        } else {
            let ring_table = DistrictTable::new(
                (0..n).map(|i| (format!("d{i}"), 10u64)).collect(),
            ).unwrap();
            let mut ring = Grid::filled(n, n, 0u64);
            for u in 0..n { ring.set(u, (u + 1) % n, 1 + u as u64); }
            let ring = CommuterMatrix::new(ring, &ring_table).unwrap();
            priority_scores(&ring, horizon, 0.9).unwrap()
        };
        build_p2(&table, &commuters, &travel, &supply, k, &targets, &scores, lambda, lambda_eq).unwrap()
    } else {
        build_p1(&table, &commuters, &travel, &supply, k, with_commuters).unwrap()
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let overall = Instant::now();
    for case in 0..60 {
        let model = random_instance(&mut rng);
        let start = Instant::now();
        let report = solve_exhaustive(&model, &SolveLimits::default()).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed > 0.05 {
            println!(
                "case {case}: {elapsed:.2}s n={} T={} k={} lam={} lam_eq={} status={:?} nodes={}",
                model.meta.n, model.meta.horizon, model.meta.k,
                model.meta.lambda, model.meta.lambda_eq,
                report.status, report.nodes_or_subsets
            );
        }
    }
    println!("total {:.2}s", overall.elapsed().as_secs_f64());
}
