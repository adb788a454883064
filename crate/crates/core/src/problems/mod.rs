//! Instance generators, exact oracles and baselines.
//!
//! Every generator is a pure function of its parameters and seed, using
//! ChaCha8 as the random source and the ziggurat normal sampler from
//! `rand_distr` for Gaussian entries.

mod generators;
mod inference;
mod oracles;
mod spectral;
mod traffic;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsio::write_atomic;
use crate::model::{ConstrainedProblem, ModelError};

pub use generators::{
    double_constraint_costs, gen_double_constraint, gen_kmin, gen_number_partition, kmin_fields,
    partition_numbers, partition_residual_unit,
};
pub use inference::{gen_linear_system, gen_structured_cs, gen_structured_cs_with_prior, GridPrior, InferenceInstance};
pub use oracles::{brute_force, hungarian, kmin_oracle, BRUTE_FORCE_MAX_VARS};
pub use spectral::spectral_linearize;
pub use traffic::{
    deterministic_baseline, gen_traffic, shortest_path_baseline, OccupancyEntry, TrafficInstance,
    DETERMINISTIC_MAX_ITERATIONS,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no configuration satisfies every infinite-weight constraint")]
    Infeasible,
    #[error("brute force supports at most {max} variables, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("matrix has negative eigenvalue {0}")]
    NegativeEigenvalue(f64),
    #[error("could not generate a valid instance after {0} attempts")]
    GenerationFailed(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sidecar describing how an instance was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
    pub params: serde_json::Value,
}

/// Writes `<stem>.json` (problem document) and `<stem>.provenance.json`.
pub fn write_instance(
    dir: &Path,
    stem: &str,
    problem: &ConstrainedProblem,
    provenance: &Provenance,
) -> Result<(), ProblemError> {
    write_atomic(&dir.join(format!("{stem}.json")), problem.to_json().as_bytes())?;
    let prov = serde_json::to_string_pretty(provenance).expect("provenance serializes");
    write_atomic(&dir.join(format!("{stem}.provenance.json")), prov.as_bytes())?;
    Ok(())
}
