use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{rng, ProblemError};
use crate::model::{BinaryVector, ConstrainedProblem, LinearConstraint, QuadraticObjective};

/// `y = A q0` with Gaussian `A` (M x N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceInstance {
    pub a: Vec<Vec<f64>>,
    pub truth: BinaryVector,
    pub y: Vec<f64>,
}

impl InferenceInstance {
    pub fn mse(&self, q: &BinaryVector) -> f64 {
        q.mse(&self.truth)
    }

    fn problem(&self, base: QuadraticObjective) -> Result<ConstrainedProblem, ProblemError> {
        let n = self.truth.len();
        let cons = self
            .a
            .iter()
            .zip(&self.y)
            .map(|(row, &y)| LinearConstraint::from_dense(row, y))
            .collect();
        Ok(ConstrainedProblem::new(n, base, cons)?)
    }
}

fn measure(a: &[Vec<f64>], q: &BinaryVector) -> Vec<f64> {
    // summed in index order, like constraint evaluation, so the truth is exactly feasible
    a.iter()
        .map(|row| {
            let mut s = 0.0;
            for (i, &x) in row.iter().enumerate() {
                if q.get(i) == 1 && x != 0.0 {
                    s += x;
                }
            }
            s
        })
        .collect()
}

fn gaussian_rows(r: &mut impl Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..n).map(|_| r.sample(StandardNormal)).collect()).collect()
}

/// Random binary signal observed through `M` Gaussian linear measurements.
pub fn gen_linear_system(
    n: usize,
    m: usize,
    seed: u64,
) -> Result<(InferenceInstance, ConstrainedProblem), ProblemError> {
    if n == 0 || m == 0 {
        return Err(ProblemError::InvalidParams(format!("need N, M >= 1, got N={n}, M={m}")));
    }
    let mut r = rng(seed);
    let truth = BinaryVector::from_bools(&(0..n).map(|_| r.gen::<bool>()).collect::<Vec<_>>());
    let a = gaussian_rows(&mut r, m, n);
    let y = measure(&a, &truth);
    let inst = InferenceInstance { a, truth, y };
    let p = inst.problem(QuadraticObjective::new())?;
    Ok((inst, p))
}

/// Nearest-neighbour prior on the image grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GridPrior {
    /// `J * sum_edges (q_i + q_j - 2 q_i q_j)`: counts boundary edges, so
    /// connected blobs are cheap.
    Attractive { j: f64 },
    /// `J * sum_edges q_i q_j`, penalizing occupied neighbours.
    Literal { j: f64 },
    None,
}

impl Default for GridPrior {
    fn default() -> Self {
        GridPrior::Attractive { j: 1.0 }
    }
}

fn grid_edges(w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                edges.push((i, i + 1));
            }
            if r + 1 < h {
                edges.push((i, i + w));
            }
        }
    }
    edges
}

fn prior_objective(w: usize, h: usize, prior: GridPrior) -> QuadraticObjective {
    let mut obj = QuadraticObjective::new();
    for (i, j) in grid_edges(w, h) {
        match prior {
            GridPrior::Attractive { j: coupling } => {
                obj.add_linear(i, coupling);
                obj.add_linear(j, coupling);
                obj.add_quadratic(i, j, -2.0 * coupling);
            }
            GridPrior::Literal { j: coupling } => obj.add_quadratic(i, j, coupling),
            GridPrior::None => {}
        }
    }
    obj
}

/// Random-walk growth from a random pixel until a quarter of the grid is set.
fn blob(r: &mut impl Rng, w: usize, h: usize) -> BinaryVector {
    let n = w * h;
    let target = ((0.25 * n as f64).round() as usize).max(1);
    let mut q = vec![false; n];
    let mut cur = r.gen_range(0..n);
    q[cur] = true;
    let mut count = 1;
    while count < target {
        let (row, col) = (cur / w, cur % w);
        let next = match r.gen_range(0..4) {
            0 if row > 0 => Some(cur - w),
            1 if row + 1 < h => Some(cur + w),
            2 if col > 0 => Some(cur - 1),
            3 if col + 1 < w => Some(cur + 1),
            _ => None,
        };
        if let Some(nx) = next {
            cur = nx;
            if !q[cur] {
                q[cur] = true;
                count += 1;
            }
        }
    }
    BinaryVector::from_bools(&q)
}

/// Connected blob on a `width x height` grid, measured with
/// `round(alpha * N)` Gaussian rows, with the default attractive prior.
pub fn gen_structured_cs(
    width: usize,
    height: usize,
    alpha: f64,
    seed: u64,
) -> Result<(InferenceInstance, ConstrainedProblem), ProblemError> {
    gen_structured_cs_with_prior(width, height, alpha, seed, GridPrior::default())
}

/// [`gen_structured_cs`] with an explicit prior. The instance itself depends
/// only on the geometry, `alpha` and `seed`.
pub fn gen_structured_cs_with_prior(
    width: usize,
    height: usize,
    alpha: f64,
    seed: u64,
    prior: GridPrior,
) -> Result<(InferenceInstance, ConstrainedProblem), ProblemError> {
    if width < 2 || height < 2 {
        return Err(ProblemError::InvalidParams(format!("grid {width}x{height} is degenerate")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ProblemError::InvalidParams(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let n = width * height;
    let m = ((alpha * n as f64).round() as usize).max(1);
    let mut r = rng(seed);
    let truth = blob(&mut r, width, height);
    let a = gaussian_rows(&mut r, m, n);
    let y = measure(&a, &truth);
    let inst = InferenceInstance { a, truth, y };
    let p = inst.problem(prior_objective(width, height, prior))?;
    Ok((inst, p))
}

/// Helper for small exact cases: instance from explicit data.
#[cfg(test)]
pub(crate) fn from_parts(a: Vec<Vec<f64>>, truth: BinaryVector) -> InferenceInstance {
    let y = measure(&a, &truth);
    InferenceInstance { a, truth, y }
}
