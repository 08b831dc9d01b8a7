//! Travel inconvenience for commuters and non-commuters, and the logit
//! vaccination-acceptance model.
//!
//! A commuter living in `u` and working in `v` who is vaccinated at `w`
//! picks the cheapest of four routings: a dedicated round trip from home, a
//! dedicated round trip from work, or folding the stop into either commute
//! direction. Non-commuters always pay the home round trip.

use thiserror::Error;

use crate::ingest::TravelMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TravelError {
    #[error("assigned site {assigned} is not open")]
    SiteNotOpen { assigned: usize },
    #[error("acceptance model needs at least one open site")]
    NoOpenSites,
    #[error("district index {0} out of range")]
    BadDistrict(usize),
}

/// Extra minutes for a commuter `u -> v` vaccinated at `w`: the minimum of
/// the four routing options. May be negative when the matrix violates the
/// triangle inequality; returned as-is.
pub fn commuter_cost<T: Scalar>(u: usize, v: usize, w: usize, c: &TravelMatrix<T>) -> T {
    let home_trip = c.at(u, w) + c.at(w, u);
    let work_trip = c.at(v, w) + c.at(w, v);
    let en_route_home = c.at(v, w) + c.at(w, u) - c.at(v, u);
    let en_route_work = c.at(u, w) + c.at(w, v) - c.at(u, v);
    home_trip.min(work_trip).min(en_route_home).min(en_route_work)
}

/// Extra minutes for a non-commuter of `u` vaccinated at `w`: the round trip.
pub fn noncommuter_cost<T: Scalar>(u: usize, w: usize, c: &TravelMatrix<T>) -> T {
    c.at(u, w) + c.at(w, u)
}

/// Travel matrix plus the derived round-trip matrix and commuter tensor.
///
/// The tensor is materialized eagerly for up to 64 districts (n^3 entries)
/// and computed on demand above that.
#[derive(Debug, Clone)]
pub struct TravelModel<T = f64> {
    c: TravelMatrix<T>,
    roundtrip: Vec<T>,
    tensor: Option<Vec<T>>,
}

const EAGER_TENSOR_LIMIT: usize = 64;

impl<T: Scalar> TravelModel<T> {
    pub fn new(c: TravelMatrix<T>) -> Self {
        let n = c.n();
        let mut roundtrip = vec![T::zero(); n * n];
        for u in 0..n {
            for w in 0..n {
                roundtrip[u * n + w] = noncommuter_cost(u, w, &c);
            }
        }
        let tensor = (n <= EAGER_TENSOR_LIMIT).then(|| {
            let mut d = vec![T::zero(); n * n * n];
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        d[(u * n + v) * n + w] = commuter_cost(u, v, w, &c);
                    }
                }
            }
            d
        });
        Self {
            c,
            roundtrip,
            tensor,
        }
    }

    pub fn n(&self) -> usize {
        self.c.n()
    }

    pub fn matrix(&self) -> &TravelMatrix<T> {
        &self.c
    }

    /// `c[u][w] + c[w][u]`.
    #[inline]
    pub fn roundtrip(&self, u: usize, w: usize) -> T {
        self.roundtrip[u * self.n() + w]
    }

    /// `d[u][v][w]`, the four-option minimum.
    #[inline]
    pub fn commuter(&self, u: usize, v: usize, w: usize) -> T {
        match &self.tensor {
            Some(d) => {
                let n = self.n();
                d[(u * n + v) * n + w]
            }
            None => commuter_cost(u, v, w, &self.c),
        }
    }
}

/// Logit probability that an assignee shows up, driven by how the assigned
/// site compares with the other open sites.
#[derive(Debug, Clone)]
pub struct AcceptanceModel<T = f64> {
    open_sites: Vec<usize>,
    /// Dense `(u, v, open-site-slot)` score and likelihood tables.
    nu: Vec<T>,
    likelihood: Vec<T>,
    /// District index -> slot in `open_sites`, if open.
    slot: Vec<Option<usize>>,
}

impl<T: Scalar> AcceptanceModel<T> {
    /// Precompute scores for every `(u, v, assigned)` with `assigned` open.
    pub fn new(travel: &TravelModel<T>, open_sites: &[usize]) -> Result<Self, TravelError> {
        let n = travel.n();
        let mut open: Vec<usize> = open_sites.to_vec();
        open.sort_unstable();
        open.dedup();
        if open.is_empty() {
            return Err(TravelError::NoOpenSites);
        }
        if let Some(&bad) = open.iter().find(|&&w| w >= n) {
            return Err(TravelError::BadDistrict(bad));
        }
        let m = open.len();
        let mut slot = vec![None; n];
        for (i, &w) in open.iter().enumerate() {
            slot[w] = Some(i);
        }
        let mut nu = vec![T::zero(); n * n * m];
        let mut likelihood = vec![T::zero(); n * n * m];
        for u in 0..n {
            for v in 0..n {
                let options: Vec<T> = open.iter().map(|&w| travel.commuter(u, v, w)).collect();
                let mut lo = options[0];
                let mut hi = options[0];
                let mut total = T::zero();
                for &d in &options {
                    lo = lo.min(d);
                    hi = hi.max(d);
                    total += d;
                }
                let spread = hi - lo;
                for (i, &assigned_cost) in options.iter().enumerate() {
                    let score = if spread > T::zero() {
                        (total - T::from_count(m as u64) * assigned_cost) / spread
                    } else {
                        T::zero()
                    };
                    let idx = (u * n + v) * m + i;
                    nu[idx] = score;
                    likelihood[idx] = logistic(score);
                }
            }
        }
        Ok(Self {
            open_sites: open,
            nu,
            likelihood,
            slot,
        })
    }

    pub fn open_sites(&self) -> &[usize] {
        &self.open_sites
    }

    /// Normalized travel advantage of the assigned site; zero when all open
    /// sites are equidistant (including a single open site).
    pub fn score(&self, u: usize, v: usize, assigned: usize) -> Result<T, TravelError> {
        let i = self.slot[assigned].ok_or(TravelError::SiteNotOpen { assigned })?;
        let n = self.slot.len();
        Ok(self.nu[(u * n + v) * self.open_sites.len() + i])
    }

    /// Probability of showing up; 0.5 at a zero score.
    pub fn likelihood(&self, u: usize, v: usize, assigned: usize) -> Result<T, TravelError> {
        let i = self.slot[assigned].ok_or(TravelError::SiteNotOpen { assigned })?;
        let n = self.slot.len();
        Ok(self.likelihood[(u * n + v) * self.open_sites.len() + i])
    }
}

fn logistic<T: Scalar>(x: T) -> T {
    let e = x.exp();
    e / (T::one() + e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;

    fn matrix(n: usize, entries: &[(usize, usize, f64)]) -> TravelMatrix<f64> {
        let mut c = Grid::filled(n, n, 0.0);
        for &(u, v, minutes) in entries {
            c.set(u, v, minutes);
        }
        TravelMatrix::new(c).unwrap()
    }

    #[test]
    fn commuter_cost_all_same_district_is_zero() {
        let c = matrix(2, &[(0, 1, 5.0), (1, 0, 7.0)]);
        assert_eq!(commuter_cost(0, 0, 0, &c), 0.0);
    }

    #[test]
    fn commuter_cost_symmetric_example() {
        // A=0, B=1, W=2; symmetric costs c(A,W)=5, c(B,W)=4, c(A,B)=8.
        // Options: {10, 8, 4+5-8=1, 5+4-8=1} -> 1.
        let c = matrix(
            3,
            &[
                (0, 2, 5.0),
                (2, 0, 5.0),
                (1, 2, 4.0),
                (2, 1, 4.0),
                (0, 1, 8.0),
                (1, 0, 8.0),
            ],
        );
        assert_eq!(commuter_cost(0, 1, 2, &c), 1.0);
    }

    #[test]
    fn commuter_cost_site_at_home_is_zero() {
        // w = u: options collapse to {0, work trip, 0, 0}.
        let c = matrix(3, &[(0, 1, 9.0), (1, 0, 3.0), (0, 2, 4.0), (2, 0, 6.0), (1, 2, 5.0), (2, 1, 2.0)]);
        for v in 0..3 {
            assert_eq!(commuter_cost(0, v, 0, &c), 0.0);
        }
    }

    #[test]
    fn noncommuter_cost_examples() {
        let c = matrix(2, &[(0, 1, 10.0), (1, 0, 12.0)]);
        assert_eq!(noncommuter_cost(0, 0, &c), 0.0);
        assert_eq!(noncommuter_cost(0, 1, &c), 22.0);
        let c = matrix(2, &[(1, 0, 7.0)]);
        assert_eq!(noncommuter_cost(0, 1, &c), 7.0);
    }

    /// Independent enumeration of the four routing options.
    fn four_option_minimum(u: usize, v: usize, w: usize, c: &TravelMatrix<f64>) -> f64 {
        let options = [
            c.at(u, w) + c.at(w, u),
            c.at(v, w) + c.at(w, v),
            c.at(v, w) + c.at(w, u) - c.at(v, u),
            c.at(u, w) + c.at(w, v) - c.at(u, v),
        ];
        options.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn tensor_matches_brute_force_and_bounds() {
        let c = matrix(
            3,
            &[
                (0, 1, 3.0),
                (1, 0, 4.0),
                (0, 2, 10.0),
                (2, 0, 2.0),
                (1, 2, 6.0),
                (2, 1, 5.0),
            ],
        );
        let model = TravelModel::new(c.clone());
        for u in 0..3 {
            for v in 0..3 {
                for w in 0..3 {
                    let d = model.commuter(u, v, w);
                    assert_eq!(d, four_option_minimum(u, v, w, &c));
                    assert!(d <= model.roundtrip(u, w));
                    assert!(d <= model.roundtrip(v, w));
                }
            }
        }
        assert_eq!(model.commuter(1, 1, 1), 0.0);
        assert_eq!(model.roundtrip(1, 1), 0.0);
    }

    #[test]
    fn single_open_site_gives_half() {
        let c = matrix(2, &[(0, 1, 10.0), (1, 0, 12.0)]);
        let model = TravelModel::new(c);
        let acc = AcceptanceModel::new(&model, &[1]).unwrap();
        assert_eq!(acc.likelihood(0, 0, 1).unwrap(), 0.5);
        assert!(matches!(
            acc.likelihood(0, 0, 0),
            Err(TravelError::SiteNotOpen { assigned: 0 })
        ));
    }

    /// Build a model whose (u=0, v=0) commuter options at the three open
    /// sites are exactly {2, 4, 10} minutes.
    fn tri_option_model() -> TravelModel<f64> {
        // Four districts; sites at 1, 2, 3. Round trips from 0: 2, 4, 10.
        // Non-commuter slice (v = u = 0) only depends on round trips.
        let mut entries = Vec::new();
        for (w, half) in [(1usize, 1.0), (2, 2.0), (3, 5.0)] {
            entries.push((0, w, half));
            entries.push((w, 0, half));
        }
        // Fill remaining pairs with large symmetric values.
        for u in 1..4 {
            for v in 1..4 {
                if u != v {
                    entries.push((u, v, 50.0));
                }
            }
        }
        TravelModel::new(matrix(4, &entries))
    }

    #[test]
    fn logit_example_best_site() {
        // Options {2,4,10}, assigned d=2: nu = (0+2+8)/8 = 1.25.
        let model = tri_option_model();
        let acc = AcceptanceModel::new(&model, &[1, 2, 3]).unwrap();
        assert_abs_diff_eq!(acc.score(0, 0, 1).unwrap(), 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(acc.likelihood(0, 0, 1).unwrap(), 0.77730, epsilon = 1e-5);
    }

    #[test]
    fn logit_example_worst_site() {
        // Options {2,4,10}, assigned d=10: nu = (-8-6+0)/8 = -1.75.
        let model = tri_option_model();
        let acc = AcceptanceModel::new(&model, &[1, 2, 3]).unwrap();
        assert_abs_diff_eq!(acc.score(0, 0, 3).unwrap(), -1.75, epsilon = 1e-12);
        assert_abs_diff_eq!(acc.likelihood(0, 0, 3).unwrap(), 0.14804, epsilon = 1e-5);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        const N: usize = 5;

        fn random_matrix() -> impl Strategy<Value = TravelMatrix<f64>> {
            proptest::collection::vec(0.0f64..100.0, N * N).prop_map(|mut raw| {
                let mut g = Grid::filled(N, N, 0.0);
                for u in 0..N {
                    for v in 0..N {
                        if u != v {
                            g.set(u, v, raw.pop().unwrap());
                        }
                    }
                }
                TravelMatrix::new(g).unwrap()
            })
        }

        proptest! {
            #[test]
            fn minimum_dominance(c in random_matrix()) {
                let model = TravelModel::new(c.clone());
                for u in 0..N {
                    for v in 0..N {
                        for w in 0..N {
                            prop_assert_eq!(model.commuter(u, v, w), four_option_minimum(u, v, w, &c));
                        }
                    }
                }
            }

            // Metric (symmetric, triangle-satisfying) matrices keep d nonnegative.
            #[test]
            fn symmetric_metric_collapse(raw in proptest::collection::vec(1.0f64..100.0, N * N)) {
                let mut g = Grid::filled(N, N, 0.0);
                for u in 0..N {
                    for v in (u + 1)..N {
                        let x = raw[u * N + v];
                        g.set(u, v, x);
                        g.set(v, u, x);
                    }
                }
                // Metric closure via Floyd-Warshall keeps symmetry and adds
                // the triangle inequality.
                for k in 0..N {
                    for u in 0..N {
                        for v in 0..N {
                            let through = g.at(u, k) + g.at(k, v);
                            if through < g.at(u, v) {
                                g.set(u, v, through);
                            }
                        }
                    }
                }
                let model = TravelModel::new(TravelMatrix::new(g).unwrap());
                for u in 0..N {
                    for v in 0..N {
                        for w in 0..N {
                            prop_assert!(model.commuter(u, v, w) >= -1e-9);
                        }
                    }
                }
            }

            // Collapse: with v = u the commuter formula equals the round trip.
            #[test]
            fn noncommuter_consistency(c in random_matrix()) {
                for u in 0..N {
                    for w in 0..N {
                        prop_assert_eq!(commuter_cost(u, u, w, &c), noncommuter_cost(u, w, &c));
                    }
                }
            }

            // Decreasing the assigned site's d strictly increases likelihood.
            #[test]
            fn logit_monotone_in_assigned_cost(shrink in 0.1f64..0.9) {
                let base = tri_option_model();
                let acc = AcceptanceModel::new(&base, &[1, 2, 3]).unwrap();
                let l_before = acc.likelihood(0, 0, 2).unwrap();

                // Rebuild with site 2's round trip scaled down.
                let mut entries = Vec::new();
                for (w, half) in [(1usize, 1.0), (2, 2.0 * shrink), (3, 5.0)] {
                    entries.push((0, w, half));
                    entries.push((w, 0, half));
                }
                for u in 1..4 {
                    for v in 1..4 {
                        if u != v {
                            entries.push((u, v, 50.0));
                        }
                    }
                }
                let closer = TravelModel::new(matrix(4, &entries));
                let acc2 = AcceptanceModel::new(&closer, &[1, 2, 3]).unwrap();
                let l_after = acc2.likelihood(0, 0, 2).unwrap();
                prop_assert!(l_after > l_before);
            }
        }
    }
}
