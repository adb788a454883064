use nalgebra::{DMatrix, SymmetricEigen};

use super::ProblemError;
use crate::model::{ConstrainedProblem, LinearConstraint, PenaltyWeight, QuadraticObjective};

const SYMMETRY_RTOL: f64 = 1e-12;
const NEGATIVE_TOL: f64 = 1e-10;

/// Rewrites `1/2 q^T A q` for positive-semidefinite `A` as
/// `1/2 sum_k F_k(q)^2` with `F_k = sqrt(lambda_k) u_k . q` and targets 0.
///
/// Each emitted constraint has unit penalty weight, so the penalty form of
/// the result equals `1/2 q^T A q`. Eigenvalues below `-1e-10` are rejected;
/// numerically zero eigenvalues are dropped.
pub fn spectral_linearize(a: &DMatrix<f64>) -> Result<ConstrainedProblem, ProblemError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(ProblemError::InvalidParams(format!("matrix is {}x{}", n, a.ncols())));
    }
    let scale = a.amax().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                return Err(ProblemError::Asymmetric(i, j));
            }
        }
    }
    let eig = SymmetricEigen::new(a.clone());
    let top = eig.eigenvalues.amax();
    let mut cons = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -NEGATIVE_TOL {
            return Err(ProblemError::NegativeEigenvalue(lam));
        }
        if lam <= 1e-14 * top.max(1.0) {
            continue;
        }
        let s = lam.sqrt();
        let coeffs: Vec<f64> = eig.eigenvectors.column(k).iter().map(|u| s * u).collect();
        if coeffs.iter().all(|&c| c == 0.0) {
            continue;
        }
        cons.push(LinearConstraint::from_dense(&coeffs, 0.0).with_penalty(PenaltyWeight::Finite(1.0)));
    }
    Ok(ConstrainedProblem::new(n, QuadraticObjective::new(), cons)?)
}
