use super::ProblemError;
use crate::model::{BinaryVector, ConstrainedProblem};

pub const BRUTE_FORCE_MAX_VARS: usize = 24;

/// Exhaustive minimizer.
///
/// With all weights finite this minimizes the penalty form; otherwise it
/// minimizes `f0` plus any finite penalties over configurations satisfying
/// every infinite-weight constraint. Ties resolve to the lexicographically
/// smallest configuration.
pub fn brute_force(p: &ConstrainedProblem) -> Result<(BinaryVector, f64), ProblemError> {
    let n = p.n_vars();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(ProblemError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_VARS,
        });
    }
    let mut q = vec![0u8; n];
    let mut best: Option<(Vec<u8>, f64)> = None;
    for mask in 0u64..(1u64 << n) {
        for (i, b) in q.iter_mut().enumerate() {
            *b = ((mask >> (n - 1 - i)) & 1) as u8;
        }
        if !p.is_feasible_unchecked(&q) {
            continue;
        }
        let e = p.penalty_energy_unchecked(&q);
        if best.as_ref().is_none_or(|(_, be)| e < *be) {
            best = Some((q.clone(), e));
        }
    }
    let (q, e) = best.ok_or(ProblemError::Infeasible)?;
    Ok((BinaryVector::new(q)?, e))
}

/// Sum of the `k` smallest fields.
pub fn kmin_oracle(h: &[f64], k: usize) -> f64 {
    let mut sorted = h.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[..k.min(sorted.len())].iter().sum()
}

/// Minimum-cost perfect assignment on a square matrix. Returns the column
/// assigned to every row and the total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // potentials u (rows), v (cols); p[j] = row matched to column j, 1-based
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (assign, total)
}
