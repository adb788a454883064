use rand::seq::SliceRandom;
use rand::Rng;

use super::{rng, ProblemError};
use crate::model::{ConstrainedProblem, Encoding, LinearConstraint, QuadraticObjective};

/// `f0 = sum h_i q_i` with `h_i ~ U(0,1)` and `sum q_i = K`.
pub fn gen_kmin(n: usize, k: usize, seed: u64) -> Result<ConstrainedProblem, ProblemError> {
    if k == 0 || k > n {
        return Err(ProblemError::InvalidParams(format!("need 1 <= K <= N, got N={n}, K={k}")));
    }
    let mut r = rng(seed);
    let h: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
    Ok(ConstrainedProblem::new(
        n,
        QuadraticObjective::from_linear(&h),
        vec![LinearConstraint::new((0..n).map(|i| (i, 1.0)), k as f64)],
    )?)
}

/// The `h_i` of a K-min problem.
pub fn kmin_fields(p: &ConstrainedProblem) -> Vec<f64> {
    p.base().dense_linear(p.n_vars())
}

/// Numbers `pi(i)/N` for a seeded permutation `pi` of `1..=N`, encoded as the
/// spin constraint `sum n_i s_i = 0`.
pub fn gen_number_partition(n: usize, seed: u64) -> Result<ConstrainedProblem, ProblemError> {
    if n == 0 || (n * (n + 1) / 2) % 2 != 0 {
        return Err(ProblemError::InvalidParams(format!(
            "N={n} has odd total N(N+1)/2, so no perfect partition exists"
        )));
    }
    let mut perm: Vec<usize> = (1..=n).collect();
    perm.shuffle(&mut rng(seed));
    let nf = n as f64;
    let c = LinearConstraint::from_spin(perm.iter().enumerate().map(|(i, &v)| (i, v as f64 / nf)), 0.0);
    Ok(ConstrainedProblem::new(n, QuadraticObjective::new(), vec![c])?.with_encoding(Encoding::Spin))
}

/// Recovers the numbers `n_i` from a number-partition problem.
pub fn partition_numbers(p: &ConstrainedProblem) -> Vec<f64> {
    let c = &p.constraints()[0];
    (0..p.n_vars()).map(|i| c.coeffs().get(&i).copied().unwrap_or(0.0) / 2.0).collect()
}

/// Smallest nonzero residual energy scale, `(1/N)^2 / 2`.
pub fn partition_residual_unit(n: usize) -> f64 {
    let inv = 1.0 / n as f64;
    inv * inv / 2.0
}

/// `f0 = sum h_it q_it` over an L x L grid with unit row and column sums.
/// Variable `(i, t)` has index `i * L + t`.
pub fn gen_double_constraint(l: usize, seed: u64) -> Result<ConstrainedProblem, ProblemError> {
    if l < 2 {
        return Err(ProblemError::InvalidParams(format!("need L >= 2, got {l}")));
    }
    let mut r = rng(seed);
    let h: Vec<f64> = (0..l * l).map(|_| r.gen::<f64>()).collect();
    let mut cons = Vec::with_capacity(2 * l);
    for i in 0..l {
        cons.push(LinearConstraint::new((0..l).map(|t| (i * l + t, 1.0)), 1.0));
    }
    for t in 0..l {
        cons.push(LinearConstraint::new((0..l).map(|i| (i * l + t, 1.0)), 1.0));
    }
    Ok(ConstrainedProblem::new(l * l, QuadraticObjective::from_linear(&h), cons)?)
}

/// Cost matrix `h[i][t]` of a double-constraint problem.
pub fn double_constraint_costs(p: &ConstrainedProblem) -> Vec<Vec<f64>> {
    let l = (p.n_vars() as f64).sqrt().round() as usize;
    let h = p.base().dense_linear(p.n_vars());
    h.chunks(l).map(<[f64]>::to_vec).collect()
}
