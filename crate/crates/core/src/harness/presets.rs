//! Named desk-scale parameter sets, one or more per experiment.

use std::path::PathBuf;

use super::{Experiment, InitialNu, RunSpec, SamplerSpec};
use crate::dual_ascent::{EtaMode, ExpectationMode, LineSearchScore, SolverConfig};
use crate::problems::GridPrior;
use crate::samplers::{geometric_schedule, SamplerConfig};

pub const DEFAULT_OUTPUT_DIR: &str = "runs";

pub const NAMES: [&str; 13] = [
    "kmin",
    "kmin-small",
    "kmin-gibbs",
    "number-partition",
    "number-partition-small",
    "number-partition-histogram",
    "linear-system",
    "linear-system-undersampled",
    "structured-cs",
    "structured-cs-no-prior",
    "traffic",
    "double-constraint",
    "double-constraint-large",
];

pub fn by_name(name: &str) -> Option<RunSpec> {
    Some(match name {
        "kmin" => kmin(2000, 5),
        "kmin-small" => kmin(100, 5),
        "kmin-gibbs" => kmin_gibbs(400, 5),
        "number-partition" => number_partition(2000, 2000),
        "number-partition-small" => number_partition(20, 100),
        "number-partition-histogram" => number_partition(100, 100).with_replicas(200),
        "linear-system" => linear_system(200, 160),
        "linear-system-undersampled" => linear_system(200, 80),
        "structured-cs" => structured_cs(GridPrior::default()),
        "structured-cs-no-prior" => structured_cs(GridPrior::None),
        "traffic" => traffic(8, 50),
        "double-constraint" => double_constraint(6),
        "double-constraint-large" => double_constraint(45),
        _ => return None,
    })
}

fn spec(experiment: Experiment, sampler: SamplerSpec, solver: SolverConfig) -> RunSpec {
    RunSpec {
        experiment,
        sampler,
        solver,
        initial_nu: InitialNu::Zeros,
        replicas: 1,
        seed: 0,
        replica_seeds: None,
        output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}

/// Steps `1e-6 * 2^k` for `k = 0..=20`.
pub fn geometric_eta_grid() -> Vec<f64> {
    (0..=20).map(|k| 1e-6 * f64::from(1u32 << k)).collect()
}

/// Exact field minimization; the expectation is the argmin's constraint
/// value. The geometric grid lets the multiplier settle inside the gap
/// between the K-th and (K+1)-th smallest field.
pub fn kmin(n: usize, k: usize) -> RunSpec {
    spec(
        Experiment::Kmin { n, k },
        SamplerSpec::Exact,
        SolverConfig {
            eta_grid: geometric_eta_grid(),
            expectation_mode: ExpectationMode::ExactField,
            ..SolverConfig::default()
        },
    )
}

/// Annealed Gibbs sample means; stops at the first optimal-feasible sample.
pub fn kmin_gibbs(n: usize, k: usize) -> RunSpec {
    spec(
        Experiment::Kmin { n, k },
        SamplerSpec::Gibbs {
            config: SamplerConfig {
                beta_schedule: geometric_schedule(1.0, 50.0, 8),
                sweeps_per_beta: 1,
                n_samples: 20,
                ..SamplerConfig::default()
            },
        },
        SolverConfig {
            tolerance: 0.5,
            stop_on_feasible: true,
            ..SolverConfig::default()
        },
    )
}

/// Independent draws at `beta = 1` from the field-only model, a fixed step
/// `1 / sum n_i^2` and a tolerance of three standard errors of the batch mean.
pub fn number_partition(n: usize, n_samples: usize) -> RunSpec {
    let nf = n as f64;
    let sum_sq = (nf + 1.0) * (2.0 * nf + 1.0) / (6.0 * nf);
    let mut s = spec(
        Experiment::NumberPartition { n },
        SamplerSpec::Gibbs {
            config: SamplerConfig::fixed_beta(1.0, 1, n_samples),
        },
        SolverConfig {
            max_iterations: 1000,
            eta_mode: EtaMode::Fixed(1.0 / sum_sq),
            tolerance: 3.0 * (sum_sq / n_samples as f64).sqrt(),
            stop_on_feasible: true,
            ..SolverConfig::default()
        },
    );
    s.initial_nu = InitialNu::Fill(0.2);
    s
}

/// Exact field minimization with an L2-ranked geometric line search.
pub fn linear_system(n: usize, m: usize) -> RunSpec {
    spec(
        Experiment::LinearSystem { n, m },
        SamplerSpec::Exact,
        SolverConfig {
            max_iterations: 200,
            eta_grid: geometric_eta_grid(),
            expectation_mode: ExpectationMode::ExactField,
            line_search_score: LineSearchScore::L2,
            stop_on_feasible: true,
            ..SolverConfig::default()
        },
    )
}

/// 16x16 grid at alpha = 0.6 with short annealed Gibbs runs.
pub fn structured_cs(prior: GridPrior) -> RunSpec {
    spec(
        Experiment::StructuredCs {
            width: 16,
            height: 16,
            alpha: 0.6,
            prior,
        },
        SamplerSpec::Gibbs {
            config: SamplerConfig {
                beta_schedule: geometric_schedule(0.1, 5.0, 10),
                sweeps_per_beta: 2,
                n_samples: 8,
                ..SamplerConfig::default()
            },
        },
        SolverConfig {
            max_iterations: 300,
            eta_grid: vec![0.001, 0.003, 0.01, 0.03, 0.1],
            line_search_score: LineSearchScore::L2,
            stop_on_feasible: true,
            ..SolverConfig::default()
        },
    )
}

/// `grid x grid` roads, `cars` cars with 3 candidate routes each.
pub fn traffic(grid: usize, cars: usize) -> RunSpec {
    spec(
        Experiment::Traffic {
            grid_w: grid,
            grid_h: grid,
            n_cars: cars,
            n_routes: 3,
        },
        SamplerSpec::OnehotGibbs {
            config: SamplerConfig::fixed_beta(2.0, 5, 20),
        },
        SolverConfig {
            max_iterations: 50,
            eta_mode: EtaMode::Fixed(0.5),
            tolerance: 0.0,
            regularize: true,
            ..SolverConfig::default()
        },
    )
}

/// Closed-form means at `beta = 2.5 L^2`, candidates drawn at the same beta.
pub fn double_constraint(l: usize) -> RunSpec {
    let beta = 2.5 * (l * l) as f64;
    spec(
        Experiment::DoubleConstraint { l },
        SamplerSpec::Field { beta, n_samples: 20 },
        SolverConfig {
            max_iterations: 2000,
            eta_grid: geometric_eta_grid(),
            tolerance: 0.01,
            expectation_mode: ExpectationMode::SoftField { beta },
            line_search_score: LineSearchScore::L2,
            ..SolverConfig::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in NAMES {
            let s = by_name(name).unwrap();
            s.resolve().unwrap();
            let back = RunSpec::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s, "{name}");
        }
        assert!(by_name("nope").is_none());
    }
}
