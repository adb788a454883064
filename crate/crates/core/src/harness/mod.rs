//! Batch experiment runner.
//!
//! A [`RunSpec`] names an experiment, a sampler backend and a solver config.
//! [`run`] resolves per-replica seeds, solves every replica and writes a fresh
//! run directory:
//!
//! ```text
//! <output_dir>/<experiment>-NNNN/
//!     spec.json                 resolved spec, including replica seeds
//!     replica-000/instance.json generated problem (never rewritten)
//!     replica-000/instance.provenance.json
//!     replica-000/trajectory.csv
//!     replica-000/result.json
//! ```
//!
//! `trajectory.csv` columns: `step, eta, residual_norm, mean_penalty_energy,
//! min_penalty_energy, mse, nu_norm, nu_0 .. nu_15`. `mse` is empty when the
//! experiment has no ground truth; only the first 16 multipliers are kept.

mod compare;
mod histogram;
mod output;
pub mod presets;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual_ascent::{solve_with_observer, SolveError, SolveResult, SolverConfig};
use crate::model::{l2_norm, BinaryVector, ConstrainedProblem, ModelError, MultiplierState};
use crate::problems::{
    brute_force, double_constraint_costs, gen_double_constraint, gen_kmin, gen_linear_system, gen_number_partition,
    gen_structured_cs_with_prior, gen_traffic, hungarian, kmin_fields, kmin_oracle, GridPrior, ProblemError,
    Provenance, TrafficInstance,
};
use crate::samplers::{
    AnnealerClient, ExactSampler, FieldSampler, GibbsSampler, MockAnnealerServer, OnehotGibbsSampler, OnehotPenalty,
    Sampler, SamplerConfig, SamplerError,
};

pub use compare::{compare_traffic, Comparison, InstanceComparison, MethodResult, TRAFFIC_METHODS};
pub use histogram::{histogram, Histogram, HistogramOutcome, HistogramRow};
pub use output::TRAJECTORY_NU_COLUMNS;

/// Overrides the annealer endpoint for `external` samplers without one.
pub const ANNEALER_ENV: &str = "LAGRANGE_ANNEALER_ADDR";

/// Multiplier applied to the replica index when deriving solver seeds.
pub const SOLVER_SEED_STRIDE: u64 = 0x9E37_79B9;

/// Custom problems up to this size get a brute-force optimum.
pub const CUSTOM_BRUTE_FORCE_VARS: usize = 16;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("replica {replica}: {source}")]
    Solve {
        replica: usize,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output failed validation: {0}")]
    Validation(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Kmin {
        n: usize,
        k: usize,
    },
    NumberPartition {
        n: usize,
    },
    LinearSystem {
        n: usize,
        m: usize,
    },
    StructuredCs {
        width: usize,
        height: usize,
        alpha: f64,
        #[serde(default)]
        prior: GridPrior,
    },
    Traffic {
        grid_w: usize,
        grid_h: usize,
        n_cars: usize,
        n_routes: usize,
    },
    DoubleConstraint {
        l: usize,
    },
    /// A problem document on disk. Relative paths resolve against the
    /// working directory.
    Custom {
        problem: PathBuf,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Kmin { .. } => "kmin",
            Experiment::NumberPartition { .. } => "number_partition",
            Experiment::LinearSystem { .. } => "linear_system",
            Experiment::StructuredCs { .. } => "structured_cs",
            Experiment::Traffic { .. } => "traffic",
            Experiment::DoubleConstraint { .. } => "double_constraint",
            Experiment::Custom { .. } => "custom",
        }
    }

    /// Whether [`instantiate`](Self::instantiate) can report the optimum.
    pub fn has_known_optimum(&self) -> bool {
        matches!(
            self,
            Experiment::Kmin { .. }
                | Experiment::NumberPartition { .. }
                | Experiment::LinearSystem { .. }
                | Experiment::DoubleConstraint { .. }
        )
    }

    fn params(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("experiment serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("kind");
        }
        v
    }

    /// Builds the replica instance for `seed`.
    pub fn instantiate(&self, seed: u64) -> Result<Instance, HarnessError> {
        let plain = |problem: ConstrainedProblem, optimum: Option<f64>| Instance {
            problem,
            optimum,
            truth: None,
            traffic: None,
            provenance: Some(Provenance {
                generator: self.name().into(),
                seed,
                params: self.params(),
            }),
        };
        Ok(match self {
            Experiment::Kmin { n, k } => {
                let p = gen_kmin(*n, *k, seed)?;
                let opt = kmin_oracle(&kmin_fields(&p), *k);
                plain(p, Some(opt))
            }
            // 1..N splits evenly whenever the total is even
            Experiment::NumberPartition { n } => plain(gen_number_partition(*n, seed)?, Some(0.0)),
            Experiment::LinearSystem { n, m } => {
                let (data, p) = gen_linear_system(*n, *m, seed)?;
                Instance {
                    truth: Some(data.truth),
                    ..plain(p, Some(0.0))
                }
            }
            Experiment::StructuredCs {
                width,
                height,
                alpha,
                prior,
            } => {
                let (data, p) = gen_structured_cs_with_prior(*width, *height, *alpha, seed, *prior)?;
                Instance {
                    truth: Some(data.truth),
                    ..plain(p, None)
                }
            }
            Experiment::Traffic {
                grid_w,
                grid_h,
                n_cars,
                n_routes,
            } => {
                let (t, _) = gen_traffic(*grid_w, *grid_h, *n_cars, *n_routes, seed)?;
                Instance {
                    traffic: Some(t.clone()),
                    ..plain(t.linearized_problem(), None)
                }
            }
            Experiment::DoubleConstraint { l } => {
                let p = gen_double_constraint(*l, seed)?;
                let opt = hungarian(&double_constraint_costs(&p)).1;
                plain(p, Some(opt))
            }
            Experiment::Custom { problem } => {
                let text = std::fs::read_to_string(problem).map_err(io_err(problem))?;
                let p = ConstrainedProblem::from_json(&text)?;
                let opt = if p.n_vars() <= CUSTOM_BRUTE_FORCE_VARS {
                    brute_force(&p).ok().map(|(_, e)| e)
                } else {
                    None
                };
                Instance {
                    provenance: None,
                    ..plain(p, opt)
                }
            }
        })
    }
}

/// One generated replica problem with whatever reference data is known.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: ConstrainedProblem,
    /// Optimal penalty energy, when an oracle exists.
    pub optimum: Option<f64>,
    pub truth: Option<BinaryVector>,
    pub traffic: Option<TrafficInstance>,
    pub provenance: Option<Provenance>,
}

impl Instance {
    /// Feasible and within `1e-9` (relative) of the optimum.
    pub fn is_optimal(&self, energy: f64, feasible: bool) -> bool {
        match self.optimum {
            Some(opt) => feasible && energy <= opt + 1e-9 * opt.abs().max(1.0),
            None => false,
        }
    }

    /// Cost reported alongside the incumbent: route cost for traffic,
    /// penalty energy otherwise.
    pub fn objective(&self, q: &BinaryVector) -> Result<f64, HarnessError> {
        match &self.traffic {
            Some(t) => Ok(t.cost(q)),
            None => Ok(self.problem.penalty_energy(q)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Exact,
    Gibbs {
        config: SamplerConfig,
    },
    OnehotGibbs {
        config: SamplerConfig,
    },
    Field {
        beta: f64,
        n_samples: usize,
    },
    /// HTTP annealer. Without an endpoint the harness uses
    /// `$LAGRANGE_ANNEALER_ADDR`, or else starts an in-process mock server.
    External {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        endpoint: Option<String>,
        config: SamplerConfig,
        #[serde(default)]
        onehot_penalty: OnehotPenalty,
    },
}

/// A sampler plus the mock server backing it, if one had to be started.
pub struct SamplerHandle {
    pub sampler: Box<dyn Sampler>,
    pub server: Option<MockAnnealerServer>,
}

pub(crate) fn endpoint_from_env() -> Option<String> {
    let v = std::env::var(ANNEALER_ENV).ok()?;
    let v = v.trim();
    if v.is_empty() {
        None
    } else if v.contains("://") {
        Some(v.to_string())
    } else {
        Some(format!("http://{v}"))
    }
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |e: SamplerError| HarnessError::InvalidSpec(e.to_string());
        match self {
            SamplerSpec::Exact => Ok(()),
            SamplerSpec::Gibbs { config } | SamplerSpec::OnehotGibbs { config } | SamplerSpec::External { config, .. } => {
                config.validate().map_err(bad)
            }
            SamplerSpec::Field { beta, n_samples } => SamplerConfig::fixed_beta(*beta, 1, *n_samples).validate().map_err(bad),
        }
    }

    pub fn build(&self) -> Result<SamplerHandle, HarnessError> {
        let plain = |sampler: Box<dyn Sampler>| SamplerHandle { sampler, server: None };
        Ok(match self {
            SamplerSpec::Exact => plain(Box::new(ExactSampler)),
            SamplerSpec::Gibbs { config } => plain(Box::new(GibbsSampler::new(config.clone()))),
            SamplerSpec::OnehotGibbs { config } => plain(Box::new(OnehotGibbsSampler::new(config.clone()))),
            SamplerSpec::Field { beta, n_samples } => plain(Box::new(FieldSampler {
                beta: *beta,
                n_samples: *n_samples,
            })),
            SamplerSpec::External {
                endpoint,
                config,
                onehot_penalty,
            } => {
                let (endpoint, server) = match endpoint.clone().or_else(endpoint_from_env) {
                    Some(e) => (e, None),
                    None => {
                        let s = MockAnnealerServer::with_config("127.0.0.1:0", config.clone())
                            .map_err(io_err(Path::new("mock annealer")))?;
                        (s.endpoint(), Some(s))
                    }
                };
                let client = AnnealerClient::new(endpoint, config.clone()).with_onehot_penalty(*onehot_penalty);
                SamplerHandle {
                    sampler: Box::new(client),
                    server,
                }
            }
        })
    }

    /// Sampler settings for samplers that have them.
    pub fn config(&self) -> Option<&SamplerConfig> {
        match self {
            SamplerSpec::Gibbs { config } | SamplerSpec::OnehotGibbs { config } | SamplerSpec::External { config, .. } => {
                Some(config)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialNu {
    #[default]
    Zeros,
    Fill(f64),
    Values(Vec<f64>),
}

impl InitialNu {
    pub fn state(&self, k: usize) -> Result<MultiplierState, HarnessError> {
        match self {
            InitialNu::Zeros => Ok(MultiplierState::zeros(k)),
            InitialNu::Fill(v) => Ok(MultiplierState::filled(k, *v)),
            InitialNu::Values(v) if v.len() == k => Ok(MultiplierState::new(v.clone())?),
            InitialNu::Values(v) => Err(HarnessError::InvalidSpec(format!(
                "initial_nu has {} values, problem has {k} constraints",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReplicaSeeds {
    /// Generator seed.
    pub instance: u64,
    /// Solver seed; per-iteration sampler seeds derive from it.
    pub solver: u64,
}

impl ReplicaSeeds {
    /// `base + r` for the generator, `base ^ (r * 0x9E3779B9)` for the solver.
    pub fn derive(base: u64, r: usize) -> Self {
        ReplicaSeeds {
            instance: base.wrapping_add(r as u64),
            solver: base ^ (r as u64).wrapping_mul(SOLVER_SEED_STRIDE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub experiment: Experiment,
    pub sampler: SamplerSpec,
    /// `solver.seed` is replaced by each replica's solver seed.
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial_nu: InitialNu,
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    /// Explicit per-replica seeds; derived from `seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica_seeds: Option<Vec<ReplicaSeeds>>,
    pub output_dir: PathBuf,
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::InvalidSpec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Sets the base seed and drops any explicit replica seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.replica_seeds = None;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self.replica_seeds = None;
        self
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = dir.into();
        self
    }

    pub fn seeds(&self) -> Vec<ReplicaSeeds> {
        match &self.replica_seeds {
            Some(s) => s.clone(),
            None => (0..self.replicas).map(|r| ReplicaSeeds::derive(self.seed, r)).collect(),
        }
    }

    /// Checks the spec and fills in explicit replica seeds.
    pub fn resolve(&self) -> Result<RunSpec, HarnessError> {
        if self.replicas == 0 {
            return Err(HarnessError::InvalidSpec("replicas must be at least 1".into()));
        }
        if let Some(s) = &self.replica_seeds {
            if s.len() != self.replicas {
                return Err(HarnessError::InvalidSpec(format!(
                    "{} replica seeds given for {} replicas",
                    s.len(),
                    self.replicas
                )));
            }
        }
        self.solver
            .validate()
            .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        self.sampler.validate()?;
        let mut out = self.clone();
        out.replica_seeds = Some(self.seeds());
        Ok(out)
    }

    pub(crate) fn require_distinct_seeds(&self) -> Result<(), HarnessError> {
        let seeds = self.seeds();
        let instance: HashSet<u64> = seeds.iter().map(|s| s.instance).collect();
        let solver: HashSet<u64> = seeds.iter().map(|s| s.solver).collect();
        if instance.len() != seeds.len() || solver.len() != seeds.len() {
            return Err(HarnessError::InvalidSpec("replica seeds must be distinct".into()));
        }
        Ok(())
    }
}

/// Contents of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaReport {
    pub replica: usize,
    pub seeds: ReplicaSeeds,
    pub experiment: String,
    pub sampler: String,
    /// Route cost for traffic, penalty energy otherwise.
    pub objective: f64,
    pub optimum: Option<f64>,
    pub residual_energy: Option<f64>,
    /// First iteration count (1-based) at which the incumbent was optimal.
    pub iterations_to_optimum: Option<usize>,
    pub mse: Option<f64>,
    pub result: SolveResult,
}

impl ReplicaReport {
    pub fn converged(&self) -> bool {
        self.result.converged
    }
}

/// Solves one replica. `step_mse[t]` is the incumbent MSE after record `t`.
pub(crate) fn solve_replica(
    spec: &RunSpec,
    replica: usize,
    seeds: ReplicaSeeds,
    inst: &Instance,
    sampler: &dyn Sampler,
) -> Result<(ReplicaReport, Vec<Option<f64>>), HarnessError> {
    let mut cfg = spec.solver.clone();
    cfg.seed = seeds.solver;
    let nu0 = spec.initial_nu.state(inst.problem.n_constraints())?;
    let mut step_mse = Vec::new();
    let mut first_hit = None;
    let result = solve_with_observer(&inst.problem, sampler, &nu0, &cfg, |rec, inc| {
        step_mse.push(inst.truth.as_ref().map(|t| inc.sample.mse(t)));
        if first_hit.is_none() && inst.is_optimal(inc.energy, inc.feasible) {
            first_hit = Some(rec.iteration + 1);
        }
    })
    .map_err(|source| HarnessError::Solve { replica, source })?;
    let objective = inst.objective(&result.incumbent)?;
    let report = ReplicaReport {
        replica,
        seeds,
        experiment: spec.experiment.name().into(),
        sampler: sampler.id(),
        objective,
        optimum: inst.optimum,
        residual_energy: inst.optimum.map(|o| result.incumbent_energy - o),
        iterations_to_optimum: first_hit,
        mse: inst.truth.as_ref().map(|t| result.incumbent.mse(t)),
        result,
    };
    Ok((report, step_mse))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub reports: Vec<ReplicaReport>,
}

impl RunOutcome {
    pub fn all_converged(&self) -> bool {
        self.reports.iter().all(ReplicaReport::converged)
    }
}

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::InvalidSpec(format!("cannot start {jobs} workers: {e}")))
}

/// Instantiates every replica up front so bad parameters fail before any
/// output exists.
pub(crate) fn instantiate_all(spec: &RunSpec) -> Result<Vec<Instance>, HarnessError> {
    spec.seeds()
        .iter()
        .map(|s| spec.experiment.instantiate(s.instance))
        .collect()
}

/// Runs every replica of `spec` with at most `jobs` replicas in flight and
/// writes a new run directory. Non-convergence is reported through
/// [`RunOutcome::all_converged`], not as an error.
pub fn run(spec: &RunSpec, jobs: usize) -> Result<RunOutcome, HarnessError> {
    let spec = spec.resolve()?;
    let instances = instantiate_all(&spec)?;
    let handle = spec.sampler.build()?;
    let dir = output::create_run_dir(&spec.output_dir, spec.experiment.name())?;
    output::write_spec(&dir, &spec)?;
    let seeds = spec.seeds();
    let reports = thread_pool(jobs)?.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(r, inst)| {
                let (report, step_mse) = solve_replica(&spec, r, seeds[r], inst, handle.sampler.as_ref())?;
                output::write_replica(&dir, inst, &report, &step_mse)?;
                Ok(report)
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    output::validate_run(&dir, &spec)?;
    Ok(RunOutcome { dir, reports })
}

pub(crate) fn nu_norm(nu: &[f64]) -> f64 {
    l2_norm(nu)
}
