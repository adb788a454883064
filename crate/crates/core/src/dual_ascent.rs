//! Dual ascent on the Lagrange multipliers:
//! `nu_k <- nu_k + eta * (C_k - <F_k>)`, with the expectation estimated from
//! the effective model at the current `nu`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{l2_norm, max_abs, BinaryVector, ConstrainedProblem, EffectiveModel, ModelError, MultiplierState};
use crate::samplers::{
    estimate_expectations, exact_field_expectation, exact_field_minimize, expectations_from_means, SampleBatch,
    Sampler, SamplerError,
};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("sampler failed at iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        #[source]
        source: SamplerError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    Fixed(f64),
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationMode {
    /// Empirical mean over the sampler's batch.
    SampleMean,
    /// `F_k` of the exact minimizer of the field-only effective model.
    ExactField,
    /// Closed-form Boltzmann means of the field-only effective model.
    SoftField { beta: f64 },
}

/// Norm used to rank step widths during line search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearchScore {
    #[default]
    MaxAbs,
    L2,
}

impl LineSearchScore {
    pub fn score(&self, r: &[f64]) -> f64 {
        match self {
            LineSearchScore::MaxAbs => max_abs(r),
            LineSearchScore::L2 => l2_norm(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub eta_mode: EtaMode,
    pub eta_grid: Vec<f64>,
    /// Convergence threshold on the max-abs dual gradient.
    pub tolerance: f64,
    pub expectation_mode: ExpectationMode,
    pub seed: u64,
    /// Subtract `nu_k / lambda_k` from finite-weight gradient entries.
    #[serde(default)]
    pub regularize: bool,
    #[serde(default)]
    pub line_search_score: LineSearchScore,
    /// Treat any feasible incumbent as converged, regardless of the gradient.
    #[serde(default)]
    pub stop_on_feasible: bool,
}

pub const DEFAULT_ETA_GRID: [f64; 5] = [0.01, 0.03, 0.1, 0.3, 1.0];

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 200,
            eta_mode: EtaMode::LineSearch,
            eta_grid: DEFAULT_ETA_GRID.to_vec(),
            tolerance: 1e-9,
            expectation_mode: ExpectationMode::SampleMean,
            seed: 0,
            regularize: false,
            line_search_score: LineSearchScore::MaxAbs,
            stop_on_feasible: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::InvalidConfig(m.into()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be nonnegative");
        }
        match self.eta_mode {
            EtaMode::LineSearch if self.eta_grid.is_empty() => return bad("eta_grid is empty"),
            EtaMode::Fixed(eta) if !eta.is_finite() => return bad("fixed eta must be finite"),
            _ => {}
        }
        if self.eta_grid.iter().any(|e| !e.is_finite()) {
            return bad("eta_grid entries must be finite");
        }
        if let ExpectationMode::SoftField { beta } = self.expectation_mode {
            if !(beta.is_finite() && beta >= 0.0) {
                return bad("soft_field beta must be finite and nonnegative");
            }
        }
        Ok(())
    }

    /// Sampler seed for iteration `t`. The iteration sits in the high word so
    /// it never collides with the per-replica offsets samplers apply.
    pub fn iteration_seed(&self, t: usize) -> u64 {
        self.seed ^ ((t as u64) << 32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Step width taken after this record; 0 for the final record.
    pub eta: f64,
    pub nu: Vec<f64>,
    pub expectations: Vec<f64>,
    /// `max_k |C_k - <F_k>|`.
    pub residual_norm: f64,
    /// Max-abs of the step direction (differs from `residual_norm` only when
    /// regularizing).
    pub gradient_norm: f64,
    pub mean_penalty_energy: f64,
    pub min_penalty_energy: f64,
    pub penalty_energy_best: f64,
    pub incumbent_feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub sample: BinaryVector,
    pub energy: f64,
    pub feasible: bool,
}

impl Incumbent {
    fn beats(&self, other: &Incumbent) -> bool {
        (self.feasible && !other.feasible) || (self.feasible == other.feasible && self.energy < other.energy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub incumbent: BinaryVector,
    pub incumbent_energy: f64,
    pub incumbent_feasible: bool,
    pub trajectory: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations_used: usize,
    pub final_nu: Vec<f64>,
}

/// Expectations at one multiplier setting plus the batch they came from.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub expectations: Vec<f64>,
    pub batch: SampleBatch,
}

/// Builds the effective model at `nu`, samples it, and estimates `<F>`.
pub fn evaluate(
    p: &ConstrainedProblem,
    sampler: &dyn Sampler,
    nu: &MultiplierState,
    mode: ExpectationMode,
    seed: u64,
) -> Result<Evaluation, SamplerError> {
    let model = p.build_effective(nu)?;
    let batch = sampler.sample(&model, seed)?;
    let expectations = match mode {
        ExpectationMode::SampleMean => estimate_expectations(&batch, p)?,
        _ => closed_form(p, &model, mode)?,
    };
    Ok(Evaluation { expectations, batch })
}

fn closed_form(p: &ConstrainedProblem, model: &EffectiveModel, mode: ExpectationMode) -> Result<Vec<f64>, SamplerError> {
    match mode {
        ExpectationMode::SampleMean => unreachable!("sample means need a batch"),
        ExpectationMode::ExactField => Ok(p.constraint_values(&exact_field_minimize(model)?)?),
        ExpectationMode::SoftField { beta } => Ok(expectations_from_means(p, &exact_field_expectation(model, beta)?)),
    }
}

/// Keeps the better of `incumbent` and the batch's best sample. Feasible
/// configurations always beat infeasible ones; otherwise lower penalty
/// energy wins and ties keep the earlier candidate.
pub fn track_best(
    batch: &SampleBatch,
    p: &ConstrainedProblem,
    incumbent: Option<Incumbent>,
) -> Result<Option<Incumbent>, ModelError> {
    let mut best = incumbent;
    for q in &batch.samples {
        let candidate = Incumbent {
            energy: p.penalty_energy(q)?,
            feasible: p.is_feasible(q)?,
            sample: q.clone(),
        };
        if best.as_ref().is_none_or(|b| candidate.beats(b)) {
            best = Some(candidate);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub eta: f64,
    pub nu: MultiplierState,
    pub evaluation: Evaluation,
    pub score: f64,
}

fn step(nu: &MultiplierState, eta: f64, gradient: &[f64]) -> MultiplierState {
    MultiplierState {
        nu: nu.nu.iter().zip(gradient).map(|(v, g)| v + eta * g).collect(),
        iteration: nu.iteration + 1,
    }
}

fn direction(p: &ConstrainedProblem, e: &[f64], nu: &MultiplierState, regularize: bool) -> Vec<f64> {
    p.residual(e, regularize.then_some(nu))
        .expect("expectation and multiplier lengths are checked by the solver")
}

struct Trial {
    eta: f64,
    nu: MultiplierState,
    expectations: Vec<f64>,
    batch: Option<SampleBatch>,
    score: f64,
    /// Exact dual objective, known only in exact-field mode.
    dual: f64,
}

impl Trial {
    fn beats(&self, other: &Trial) -> bool {
        (self.score, -self.dual, self.eta) < (other.score, -other.dual, other.eta)
    }
}

/// Tries every grid step from `nu` along `gradient`, re-estimating the
/// expectations with `seed`, and keeps the step with the smallest residual
/// score. Ties go to the smaller step.
///
/// In exact-field mode the dual objective `min_q f_eff(q; nu)` is exact and
/// breaks score ties before the step width does. Without it, integer
/// residuals tie across most of the grid and the search creeps along the
/// smallest step.
///
/// With closed-form expectation modes only the winning step is sampled; its
/// batch is identical to what a full evaluation would have produced.
pub fn line_search(
    p: &ConstrainedProblem,
    nu: &MultiplierState,
    gradient: &[f64],
    sampler: &dyn Sampler,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<LineSearchOutcome, SamplerError> {
    let trials: Vec<Trial> = cfg
        .eta_grid
        .par_iter()
        .map(|&eta| {
            let nu2 = step(nu, eta, gradient);
            let mut dual = 0.0;
            let (expectations, batch) = match cfg.expectation_mode {
                ExpectationMode::SampleMean => {
                    let e = evaluate(p, sampler, &nu2, cfg.expectation_mode, seed)?;
                    (e.expectations, Some(e.batch))
                }
                ExpectationMode::ExactField => {
                    let m = p.build_effective(&nu2)?;
                    let q = exact_field_minimize(&m)?;
                    dual = m.energy(q.as_slice());
                    (p.constraint_values(&q)?, None)
                }
                mode => (closed_form(p, &p.build_effective(&nu2)?, mode)?, None),
            };
            let score = cfg.line_search_score.score(&direction(p, &expectations, &nu2, cfg.regularize));
            Ok(Trial {
                eta,
                nu: nu2,
                expectations,
                batch,
                score,
                dual,
            })
        })
        .collect::<Result<_, SamplerError>>()?;
    let best = trials
        .into_iter()
        .reduce(|b, t| if t.beats(&b) { t } else { b })
        .expect("grid is nonempty");
    let batch = match best.batch {
        Some(b) => b,
        None => sampler.sample(&p.build_effective(&best.nu)?, seed)?,
    };
    Ok(LineSearchOutcome {
        eta: best.eta,
        nu: best.nu,
        evaluation: Evaluation {
            expectations: best.expectations,
            batch,
        },
        score: best.score,
    })
}

/// Runs dual ascent from `nu0`.
pub fn solve(
    p: &ConstrainedProblem,
    sampler: &dyn Sampler,
    nu0: &MultiplierState,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    solve_with_observer(p, sampler, nu0, cfg, |_, _| {})
}

/// [`solve`] with a callback invoked after every iteration with the new
/// record and the current incumbent.
pub fn solve_with_observer<F>(
    p: &ConstrainedProblem,
    sampler: &dyn Sampler,
    nu0: &MultiplierState,
    cfg: &SolverConfig,
    mut observer: F,
) -> Result<SolveResult, SolveError>
where
    F: FnMut(&IterationRecord, &Incumbent),
{
    cfg.validate()?;
    if nu0.len() != p.n_constraints() {
        return Err(ModelError::DimensionMismatch {
            expected: p.n_constraints(),
            actual: nu0.len(),
        }
        .into());
    }
    let at = |iteration: usize| move |source| SolveError::Sampler { iteration, source };

    let mut nu = nu0.clone();
    let mut eval = evaluate(p, sampler, &nu, cfg.expectation_mode, cfg.iteration_seed(0)).map_err(at(0))?;
    let mut incumbent: Option<Incumbent> = None;
    let mut trajectory = Vec::new();
    let mut converged = false;

    for t in 0..cfg.max_iterations {
        incumbent = track_best(&eval.batch, p, incumbent)?;
        let inc = incumbent.as_ref().expect("batches are nonempty");
        let plain = p.residual(&eval.expectations, None)?;
        let gradient = direction(p, &eval.expectations, &nu, cfg.regularize);
        let gradient_norm = max_abs(&gradient);
        let energies: Vec<f64> = eval
            .batch
            .samples
            .iter()
            .map(|q| p.penalty_energy(q))
            .collect::<Result<_, _>>()?;
        let mut record = IterationRecord {
            iteration: t,
            eta: 0.0,
            nu: nu.nu.clone(),
            expectations: eval.expectations.clone(),
            residual_norm: max_abs(&plain),
            gradient_norm,
            mean_penalty_energy: energies.iter().sum::<f64>() / energies.len() as f64,
            min_penalty_energy: energies.iter().copied().fold(f64::INFINITY, f64::min),
            penalty_energy_best: inc.energy,
            incumbent_feasible: inc.feasible,
        };

        converged = inc.feasible && (cfg.stop_on_feasible || gradient_norm <= cfg.tolerance);
        if !converged && t + 1 < cfg.max_iterations {
            let next_seed = cfg.iteration_seed(t + 1);
            if gradient.iter().all(|&g| g == 0.0) {
                eval = evaluate(p, sampler, &nu, cfg.expectation_mode, next_seed).map_err(at(t + 1))?;
            } else {
                match cfg.eta_mode {
                    EtaMode::Fixed(eta) => {
                        record.eta = eta;
                        nu = step(&nu, eta, &gradient);
                        eval = evaluate(p, sampler, &nu, cfg.expectation_mode, next_seed).map_err(at(t + 1))?;
                    }
                    EtaMode::LineSearch => {
                        let out = line_search(p, &nu, &gradient, sampler, cfg, next_seed).map_err(at(t + 1))?;
                        record.eta = out.eta;
                        nu = out.nu;
                        eval = out.evaluation;
                    }
                }
            }
        }
        observer(&record, inc);
        trajectory.push(record);
        if converged {
            break;
        }
    }

    let inc = incumbent.expect("at least one iteration ran");
    Ok(SolveResult {
        incumbent: inc.sample,
        incumbent_energy: inc.energy,
        incumbent_feasible: inc.feasible,
        iterations_used: trajectory.len(),
        trajectory,
        converged,
        final_nu: nu.nu,
    })
}
