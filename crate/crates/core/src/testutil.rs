//! Shared fixtures for unit tests.

use crate::epi::{priority_scores, PriorityScores};
use crate::grid::Grid;
use crate::ingest::{CommuterMatrix, DistrictTable, SupplySchedule, TravelMatrix};
use crate::travel::TravelModel;

pub struct Instance {
    pub table: DistrictTable,
    pub commuters: CommuterMatrix,
    pub travel: TravelModel<f64>,
    pub supply: SupplySchedule,
}

pub fn table_with_pops(pops: &[u64]) -> DistrictTable {
    DistrictTable::new(
        pops.iter()
            .enumerate()
            .map(|(i, &p)| (format!("d{i}"), p))
            .collect(),
    )
    .unwrap()
}

/// A deterministic dense instance: ring-shaped commuting, mildly asymmetric
/// travel times, uniform supply of 10 doses per site-period.
pub fn small_instance(n: usize, horizon: usize) -> Instance {
    let pops: Vec<u64> = (0..n).map(|u| 6 - (u as u64 % 3)).collect();
    let table = table_with_pops(&pops);
    let mut e = Grid::filled(n, n, 0u64);
    if n > 1 {
        for u in 0..n {
            e.set(u, (u + 1) % n, 2);
        }
    }
    let commuters = CommuterMatrix::new(e, &table).unwrap();
    let mut c = Grid::filled(n, n, 0.0);
    for u in 0..n {
        for v in 0..n {
            if u != v {
                let gap = (u as f64 - v as f64).abs();
                c.set(u, v, gap * 3.0 + if u < v { 1.0 } else { 2.0 });
            }
        }
    }
    let travel = TravelModel::new(TravelMatrix::new(c).unwrap());
    let supply = SupplySchedule::uniform(n, horizon, 1.min(horizon), 10).unwrap();
    Instance {
        table,
        commuters,
        travel,
        supply,
    }
}

/// Scores with equal shares and no decay.
pub fn uniform_scores(n: usize, horizon: usize) -> PriorityScores<f64> {
    let table = table_with_pops(&vec![10; n]);
    let mut e = Grid::filled(n, n, 0u64);
    for u in 0..n {
        e.set(u, (u + 1) % n, 1);
    }
    let commuters = CommuterMatrix::new(e, &table).unwrap();
    priority_scores(&commuters, horizon, 1.0).unwrap()
}
