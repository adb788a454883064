use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng, ProblemError};
use crate::model::{
    add_squared_penalty, BinaryVector, ConstrainedProblem, LinearConstraint, MultiplierState, PenaltyWeight,
    QuadraticObjective,
};
use crate::samplers::exact_field_minimize;

pub const DETERMINISTIC_MAX_ITERATIONS: usize = 50;
const DETERMINISTIC_ETA: f64 = 0.5;
const MAX_ATTEMPTS: usize = 100;
const MAX_VARIANT_TRIES: usize = 50;

/// `S_{e,mu,i} = 1`: segment `e` lies on route `mu` of car `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyEntry {
    pub e: usize,
    pub mu: usize,
    pub i: usize,
}

/// Cars with candidate routes over a shared set of road segments.
/// Variable `q_{mu,i}` has index `i * n_routes + mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficInstance {
    pub n_cars: usize,
    pub n_routes: usize,
    pub segment_count: usize,
    /// `routes[i][mu]` lists the segments of route `mu` of car `i`.
    pub routes: Vec<Vec<Vec<usize>>>,
}

impl TrafficInstance {
    pub fn from_routes(segment_count: usize, routes: Vec<Vec<Vec<usize>>>) -> Result<Self, ProblemError> {
        let n_routes = routes.first().map_or(0, Vec::len);
        if n_routes == 0 || routes.iter().any(|r| r.len() != n_routes) {
            return Err(ProblemError::InvalidParams("every car needs the same nonzero number of routes".into()));
        }
        for car in &routes {
            for route in car {
                if route.is_empty() {
                    return Err(ProblemError::InvalidParams("route without segments".into()));
                }
                if route.iter().any(|&e| e >= segment_count) {
                    return Err(ProblemError::InvalidParams("segment index out of range".into()));
                }
            }
        }
        let routes = routes
            .into_iter()
            .map(|car| {
                car.into_iter()
                    .map(|mut r| {
                        r.sort_unstable();
                        r.dedup();
                        r
                    })
                    .collect()
            })
            .collect::<Vec<Vec<Vec<usize>>>>();
        Ok(TrafficInstance {
            n_cars: routes.len(),
            n_routes,
            segment_count,
            routes,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_cars * self.n_routes
    }

    pub fn var(&self, car: usize, mu: usize) -> usize {
        car * self.n_routes + mu
    }

    pub fn route_length(&self, mu: usize, car: usize) -> usize {
        self.routes[car][mu].len()
    }

    /// `(mu, i) -> length` with unit-length segments.
    pub fn route_lengths(&self) -> BTreeMap<(usize, usize), usize> {
        let mut out = BTreeMap::new();
        for (i, car) in self.routes.iter().enumerate() {
            for (mu, r) in car.iter().enumerate() {
                out.insert((mu, i), r.len());
            }
        }
        out
    }

    pub fn occupancy(&self) -> Vec<OccupancyEntry> {
        let mut out = Vec::new();
        for (i, car) in self.routes.iter().enumerate() {
            for (mu, r) in car.iter().enumerate() {
                out.extend(r.iter().map(|&e| OccupancyEntry { e, mu, i }));
            }
        }
        out
    }

    /// Cars using each segment under assignment `q`.
    pub fn loads(&self, q: &BinaryVector) -> Vec<f64> {
        let mut load = vec![0.0; self.segment_count];
        for (i, car) in self.routes.iter().enumerate() {
            for (mu, r) in car.iter().enumerate() {
                if q.get(self.var(i, mu)) == 1 {
                    for &e in r {
                        load[e] += 1.0;
                    }
                }
            }
        }
        load
    }

    /// `1/2 sum_e load_e^2`.
    pub fn cost(&self, q: &BinaryVector) -> f64 {
        0.5 * self.loads(q).iter().map(|l| l * l).sum::<f64>()
    }

    pub fn is_assignment(&self, q: &BinaryVector) -> bool {
        (0..self.n_cars).all(|i| (0..self.n_routes).filter(|&mu| q.get(self.var(i, mu)) == 1).count() == 1)
    }

    fn segment_rows(&self) -> Vec<(usize, Vec<usize>)> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); self.segment_count];
        for (i, car) in self.routes.iter().enumerate() {
            for (mu, r) in car.iter().enumerate() {
                for &e in r {
                    rows[e].push(self.var(i, mu));
                }
            }
        }
        rows.into_iter().enumerate().filter(|(_, v)| !v.is_empty()).collect()
    }

    fn onehots(&self) -> Vec<LinearConstraint> {
        (0..self.n_cars)
            .map(|i| LinearConstraint::onehot((0..self.n_routes).map(|mu| self.var(i, mu))))
            .collect()
    }

    /// `f0 = 1/2 sum_e (sum S q)^2` as a QUBO with one-hot route choices.
    pub fn quadratic_problem(&self) -> ConstrainedProblem {
        let mut f0 = QuadraticObjective::new();
        for (_, vars) in self.segment_rows() {
            let c = LinearConstraint::new(vars.into_iter().map(|v| (v, 1.0)), 0.0);
            add_squared_penalty(&mut f0, &c, 1.0);
        }
        ConstrainedProblem::new(self.n_vars(), f0, self.onehots()).expect("instance indices are validated")
    }

    /// One unit-weight constraint `load_e = 0` per used segment, followed by
    /// the one-hot route choices. Its penalty energy equals [`cost`](Self::cost).
    pub fn linearized_problem(&self) -> ConstrainedProblem {
        let mut cons: Vec<LinearConstraint> = self
            .segment_rows()
            .into_iter()
            .map(|(_, vars)| {
                LinearConstraint::new(vars.into_iter().map(|v| (v, 1.0)), 0.0).with_penalty(PenaltyWeight::Finite(1.0))
            })
            .collect();
        cons.extend(self.onehots());
        ConstrainedProblem::new(self.n_vars(), QuadraticObjective::new(), cons).expect("instance indices are validated")
    }

    /// Segment ids matching the first constraints of
    /// [`linearized_problem`](Self::linearized_problem).
    pub fn used_segments(&self) -> Vec<usize> {
        self.segment_rows().into_iter().map(|(e, _)| e).collect()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Grid {
    adj: Vec<Vec<(usize, usize)>>,
    n_edges: usize,
}

impl Grid {
    fn new(w: usize, h: usize) -> Self {
        let mut adj = vec![Vec::new(); w * h];
        let mut e = 0;
        for r in 0..h {
            for c in 0..w {
                let a = r * w + c;
                if c + 1 < w {
                    adj[a].push((a + 1, e));
                    adj[a + 1].push((a, e));
                    e += 1;
                }
                if r + 1 < h {
                    adj[a].push((a + w, e));
                    adj[a + w].push((a, e));
                    e += 1;
                }
            }
        }
        Grid { adj, n_edges: e }
    }

    fn shortest(&self, from: usize, to: usize, weight: &[f64]) -> Option<Vec<usize>> {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push(State { dist: 0.0, node: from });
        while let Some(State { dist: d, node }) = heap.pop() {
            if node == to {
                break;
            }
            if d > dist[node] {
                continue;
            }
            for &(nb, e) in &self.adj[node] {
                let nd = d + weight[e];
                if nd < dist[nb] {
                    dist[nb] = nd;
                    prev[nb] = Some((node, e));
                    heap.push(State { dist: nd, node: nb });
                }
            }
        }
        if !dist[to].is_finite() {
            return None;
        }
        let mut path = Vec::new();
        let mut cur = to;
        while let Some((p, e)) = prev[cur] {
            path.push(e);
            cur = p;
        }
        path.sort_unstable();
        Some(path)
    }
}

/// Synthetic grid road network with unit-length edges. Each car gets a random
/// origin and destination, its shortest path, and `n_routes - 1` variants
/// found after randomly inflating the weights of edges already in use.
///
/// Returns the instance and its quadratic (non-linearized) problem.
pub fn gen_traffic(
    grid_w: usize,
    grid_h: usize,
    n_cars: usize,
    n_routes: usize,
    seed: u64,
) -> Result<(TrafficInstance, ConstrainedProblem), ProblemError> {
    if n_routes < 2 {
        return Err(ProblemError::InvalidParams(format!("need at least 2 routes, got {n_routes}")));
    }
    if grid_w * grid_h < 2 || n_cars == 0 {
        return Err(ProblemError::InvalidParams("need at least 2 nodes and 1 car".into()));
    }
    let grid = Grid::new(grid_w, grid_h);
    let nodes = grid_w * grid_h;
    let mut r = rng(seed);
    let mut routes = Vec::with_capacity(n_cars);
    for _ in 0..n_cars {
        let mut found = None;
        for _ in 0..MAX_ATTEMPTS {
            let from = r.gen_range(0..nodes);
            let to = r.gen_range(0..nodes);
            if from == to {
                continue;
            }
            let mut weight = vec![1.0; grid.n_edges];
            let Some(first) = grid.shortest(from, to, &weight) else {
                continue;
            };
            let mut car = vec![first];
            for _ in 0..MAX_VARIANT_TRIES {
                if car.len() == n_routes {
                    break;
                }
                for route in &car {
                    for &e in route {
                        weight[e] *= 1.0 + r.gen::<f64>();
                    }
                }
                if let Some(v) = grid.shortest(from, to, &weight) {
                    if !car.contains(&v) {
                        car.push(v);
                    }
                }
            }
            if car.len() == n_routes {
                found = Some(car);
                break;
            }
        }
        routes.push(found.ok_or(ProblemError::GenerationFailed(MAX_ATTEMPTS))?);
    }
    let inst = TrafficInstance::from_routes(grid.n_edges, routes)?;
    let p = inst.quadratic_problem();
    Ok((inst, p))
}

/// Every car takes its shortest candidate (lowest index on ties).
pub fn shortest_path_baseline(t: &TrafficInstance) -> BinaryVector {
    let mut q = BinaryVector::zeros(t.n_vars());
    for i in 0..t.n_cars {
        let best = (0..t.n_routes).min_by_key(|&mu| (t.route_length(mu, i), mu)).expect("routes exist");
        q.set(t.var(i, best), true);
    }
    q
}

/// Exact minimization of the linearized model with regularized multiplier
/// updates (`eta = 0.5`) until the assignment stops changing, at most
/// [`DETERMINISTIC_MAX_ITERATIONS`] times. `nu` is indexed like the
/// constraints of [`TrafficInstance::linearized_problem`].
pub fn deterministic_baseline(t: &TrafficInstance, nu: &MultiplierState) -> Result<BinaryVector, ProblemError> {
    let p = t.linearized_problem();
    let mut nu = nu.clone();
    let mut prev: Option<BinaryVector> = None;
    for _ in 0..DETERMINISTIC_MAX_ITERATIONS {
        let m = p.build_effective(&nu)?;
        let q = exact_field_minimize(&m).expect("linearized traffic models are field-only");
        if prev.as_ref() == Some(&q) {
            break;
        }
        let g = p.residual(&p.constraint_values(&q)?, Some(&nu))?;
        for (v, gk) in nu.nu.iter_mut().zip(g) {
            *v += DETERMINISTIC_ETA * gk;
        }
        prev = Some(q);
    }
    Ok(prev.expect("at least one iteration"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_assignments(t: &TrafficInstance) -> Vec<BinaryVector> {
        let total = t.n_routes.pow(t.n_cars as u32);
        (0..total)
            .map(|mut code| {
                let mut q = BinaryVector::zeros(t.n_vars());
                for i in 0..t.n_cars {
                    q.set(t.var(i, code % t.n_routes), true);
                    code /= t.n_routes;
                }
                q
            })
            .collect()
    }

    /// Two cars; route 0 of each uses the shared segment 0.
    pub(crate) fn shared_pair() -> TrafficInstance {
        TrafficInstance::from_routes(5, vec![vec![vec![0, 1], vec![2, 3]], vec![vec![0, 4], vec![1, 2, 3, 4]]]).unwrap()
    }

    #[test]
    fn single_car_prefers_shorter_route() {
        let t = TrafficInstance::from_routes(5, vec![vec![vec![0, 1, 2], vec![3, 4]]]).unwrap();
        let sp = shortest_path_baseline(&t);
        assert_eq!(sp.as_slice(), &[0, 1]);
        assert_eq!(t.cost(&sp), 1.0);
        assert_eq!(deterministic_baseline(&t, &MultiplierState::zeros(t.linearized_problem().n_constraints())).unwrap(), sp);
    }

    #[test]
    fn shared_segment_enumeration() {
        let t = shared_pair();
        let best = all_assignments(&t)
            .into_iter()
            .min_by(|a, b| t.cost(a).total_cmp(&t.cost(b)))
            .unwrap();
        assert_eq!(best.as_slice(), &[0, 1, 1, 0]);
        assert_eq!(t.cost(&best), 2.0);
        let det = deterministic_baseline(&t, &MultiplierState::zeros(t.linearized_problem().n_constraints())).unwrap();
        assert_eq!(t.cost(&det), 2.0);
    }

    #[test]
    fn stored_objective_matches_occupancy() {
        let (t, p) = gen_traffic(5, 5, 12, 3, 7).unwrap();
        let lin = t.linearized_problem();
        let mut r = rng(1);
        for _ in 0..100 {
            let mut q = BinaryVector::zeros(t.n_vars());
            for i in 0..t.n_cars {
                q.set(t.var(i, r.gen_range(0..t.n_routes)), true);
            }
            let occ = t.occupancy();
            let mut load = vec![0.0; t.segment_count];
            for o in &occ {
                load[o.e] += f64::from(q.get(t.var(o.i, o.mu)));
            }
            let direct = 0.5 * load.iter().map(|l| l * l).sum::<f64>();
            assert!((p.base().evaluate(q.as_slice()) - direct).abs() < 1e-9);
            assert!((lin.penalty_energy(&q).unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn generated_routes_are_distinct_and_valid() {
        let (t, p) = gen_traffic(6, 6, 50, 3, 11).unwrap();
        assert_eq!(p.n_vars(), 150);
        assert_eq!(p.onehot_groups().len(), 50);
        for car in &t.routes {
            assert_eq!(car.len(), 3);
            assert!(car[0] != car[1] && car[1] != car[2] && car[0] != car[2]);
            assert!(car[0].len() <= car[1].len() && car[0].len() <= car[2].len());
        }
        assert_eq!(gen_traffic(6, 6, 50, 3, 11).unwrap().0, t);
        assert!(gen_traffic(6, 6, 5, 1, 0).is_err());
    }

    #[test]
    fn full_scale_variable_count() {
        let (t, _) = gen_traffic(20, 20, 350, 3, 1).unwrap();
        assert_eq!(t.n_vars(), 1050);
    }
}
