#![allow(dead_code)]

use std::collections::HashMap;

use lagrange_anneal::dual_ascent::SolveResult;
use lagrange_anneal::model::{
    BinaryVector, ConstrainedProblem, EffectiveModel, LinearConstraint, MultiplierState, PenaltyWeight,
    QuadraticObjective,
};
use lagrange_anneal::samplers::SampleBatch;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn configs(n: usize) -> impl Iterator<Item = Vec<u8>> {
    (0u64..1 << n).map(move |m| (0..n).map(|i| ((m >> i) & 1) as u8).collect())
}

pub fn random_objective(r: &mut ChaCha8Rng, n: usize, density: f64) -> QuadraticObjective {
    let mut f0 = QuadraticObjective::new();
    for i in 0..n {
        f0.add_linear(i, r.gen_range(-1.0..1.0));
        for j in i + 1..n {
            if r.gen_bool(density) {
                f0.add_quadratic(i, j, r.gen_range(-1.0..1.0));
            }
        }
    }
    f0.add_constant(r.gen_range(-1.0..1.0));
    f0
}

/// Random problem mixing finite-weight constraints, an infinite one and,
/// for `n >= 3`, a hard one-hot group on the first three variables.
pub fn random_problem(n: usize, seed: u64, all_finite: bool) -> ConstrainedProblem {
    let mut r = rng(seed);
    let f0 = random_objective(&mut r, n, 0.5);
    let mut cons = Vec::new();
    for _ in 0..2 {
        let coeffs: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let target = r.gen_range(-1.0..2.0);
        let w = r.gen_range(0.5..3.0);
        cons.push(LinearConstraint::from_dense(&coeffs, target).with_penalty(PenaltyWeight::Finite(w)));
    }
    if !all_finite {
        let k = r.gen_range(1..=n);
        cons.push(LinearConstraint::new((0..k).map(|i| (i, 1.0)), (k / 2) as f64));
        if n >= 3 {
            cons.push(LinearConstraint::onehot([0, 1, 2]));
        }
    }
    ConstrainedProblem::new(n, f0, cons).unwrap()
}

pub fn random_nu(k: usize, seed: u64) -> MultiplierState {
    let mut r = rng(seed ^ 0xabc);
    MultiplierState::new((0..k).map(|_| r.gen_range(-2.0..2.0)).collect()).unwrap()
}

/// Largest disagreement, over every configuration, between the effective
/// model's energy and `f0 - sum nu F + sum nu C - sum_finite nu^2 / 2 lambda`.
pub fn effective_energy_gap(p: &ConstrainedProblem, nu: &MultiplierState) -> f64 {
    let m = p.build_effective(nu).unwrap();
    let mut worst: f64 = 0.0;
    for q in configs(p.n_vars()) {
        let mut want = p.base().evaluate(&q);
        for (k, c) in p.constraints().iter().enumerate() {
            if c.is_hard_onehot() {
                continue;
            }
            want += nu.nu[k] * (c.target() - c.value(&q));
            if let PenaltyWeight::Finite(w) = c.penalty() {
                want -= nu.nu[k] * nu.nu[k] / (2.0 * w);
            }
        }
        worst = worst.max((m.energy(&q) - want).abs() / want.abs().max(1.0));
    }
    worst
}

/// For an all-finite problem: at `nu_k = lambda_k (C_k - F_k(q))` the
/// effective energy of `q` equals its penalty-form energy, and for any other
/// `nu` it is no larger. Returns the worst equality gap; panics on a bound
/// violation.
pub fn penalty_bound_gap(p: &ConstrainedProblem, probe: &MultiplierState) -> f64 {
    let probe_model = p.build_effective(probe).unwrap();
    let mut worst: f64 = 0.0;
    for q in configs(p.n_vars()) {
        let bv = BinaryVector::new(q.clone()).unwrap();
        let pen = p.evaluate_penalty_form(&bv).unwrap();
        let star: Vec<f64> = p
            .constraints()
            .iter()
            .map(|c| match c.penalty() {
                PenaltyWeight::Finite(w) => w * (c.target() - c.value(&q)),
                PenaltyWeight::Infinite => unreachable!("all-finite problem"),
            })
            .collect();
        let at_star = p.build_effective(&MultiplierState::new(star).unwrap()).unwrap().energy(&q);
        worst = worst.max((at_star - pen).abs() / pen.abs().max(1.0));
        let other = probe_model.energy(&q);
        assert!(other <= pen + 1e-9 * pen.abs().max(1.0), "bound violated: {other} > {pen}");
    }
    worst
}

/// Exact Boltzmann distribution `exp(-beta E)` over group-satisfying states.
pub fn boltzmann(m: &EffectiveModel, beta: f64) -> HashMap<Vec<u8>, f64> {
    let states: Vec<(Vec<u8>, f64)> = configs(m.n_vars)
        .filter(|q| m.satisfies_groups(q))
        .map(|q| {
            let e = m.energy(&q);
            (q, e)
        })
        .collect();
    let emin = states.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let z: f64 = states.iter().map(|s| (-beta * (s.1 - emin)).exp()).sum();
    states.into_iter().map(|(q, e)| (q, (-beta * (e - emin)).exp() / z)).collect()
}

/// Total-variation distance between a batch's empirical law and `exact`.
pub fn tv_distance(batch: &SampleBatch, exact: &HashMap<Vec<u8>, f64>) -> f64 {
    let mut counts: HashMap<Vec<u8>, f64> = HashMap::new();
    for s in &batch.samples {
        *counts.entry(s.as_slice().to_vec()).or_default() += 1.0;
    }
    let n = batch.len() as f64;
    let mut tv = 0.0;
    for (q, p) in exact {
        tv += (counts.get(q).copied().unwrap_or(0.0) / n - p).abs();
    }
    for (q, c) in &counts {
        if !exact.contains_key(q) {
            tv += c / n;
        }
    }
    0.5 * tv
}

/// Random positive-semidefinite matrix `B B^T` of rank at most `rank`.
pub fn random_psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let b = DMatrix::from_fn(n, rank, |_, _| r.gen_range(-1.0..1.0));
    &b * b.transpose()
}

/// Largest `|penalty form - 1/2 q^T A q|` over all `q`.
pub fn spectral_gap(a: &DMatrix<f64>) -> f64 {
    let p = lagrange_anneal::problems::spectral_linearize(a).unwrap();
    let n = a.nrows();
    configs(n)
        .map(|q| {
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += a[(i, j)] * f64::from(q[i] * q[j]);
                }
            }
            let e = p.evaluate_penalty_form(&BinaryVector::new(q).unwrap()).unwrap();
            (e - 0.5 * quad).abs()
        })
        .fold(0.0, f64::max)
}

/// Checks `nu_{t+1} = nu_t + eta_t (C - <F>_t [- nu_t / lambda])` bit for bit
/// on every step of a trajectory. Returns the number of steps checked.
pub fn check_update_algebra(p: &ConstrainedProblem, res: &SolveResult, regularize: bool) -> Result<usize, String> {
    let tr = &res.trajectory;
    let mut checked = 0;
    for t in 0..tr.len() {
        let (cur, next) = (&tr[t], tr.get(t + 1).map(|r| &r.nu).unwrap_or(&res.final_nu));
        if t + 1 == tr.len() && cur.eta == 0.0 {
            if next != &cur.nu {
                return Err(format!("final nu moved without a step at {t}"));
            }
            continue;
        }
        let nu = MultiplierState::new(cur.nu.clone()).unwrap();
        let g = p.residual(&cur.expectations, regularize.then_some(&nu)).unwrap();
        let want: Vec<f64> = if cur.eta == 0.0 {
            cur.nu.clone()
        } else {
            cur.nu.iter().zip(&g).map(|(v, gk)| v + cur.eta * gk).collect()
        };
        if &want != next {
            return Err(format!("step {t}: expected {:?}, recorded {:?}", &want[..want.len().min(4)], &next[..next.len().min(4)]));
        }
        checked += 1;
    }
    Ok(checked)
}
