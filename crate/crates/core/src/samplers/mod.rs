//! Samplers turning an [`EffectiveModel`] into configurations and constraint
//! expectations.
//!
//! Local samplers are pure functions of `(model, config)`. The sampling
//! distribution at inverse temperature `beta` is `Q(q) ∝ exp(-beta * H(q))`
//! where `H` is the full effective energy.

mod external;
mod gibbs;
mod mock_server;
mod onehot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BinaryVector, ConstrainedProblem, EffectiveModel, ModelError};

pub use external::{external_annealer_submit, AnnealerClient, OnehotPenalty, SampleRequest, SampleResponse};
pub use gibbs::{gibbs_sample, GibbsChain};
pub use mock_server::{model_from_wire, model_to_wire, MockAnnealerServer};
pub use onehot::onehot_gibbs_sample;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("model has quadratic terms; field-only operation not applicable")]
    QuadraticTerms,
    #[error("empty sample batch")]
    EmptyBatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("network failure after {attempts} attempts: {message}")]
    Network { attempts: usize, message: String },
    #[error("annealer returned HTTP status {0}")]
    Status(u16),
    #[error("malformed annealer response: {0}")]
    MalformedResponse(String),
    #[error("sample {index} has length {actual}, expected {expected}")]
    SampleLength {
        index: usize,
        expected: usize,
        actual: usize,
    },
}

/// Annealing schedule and batch size shared by all local samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub beta_schedule: Vec<f64>,
    pub sweeps_per_beta: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Samples are recorded after extra sweeps at this β when it differs from
    /// the last schedule entry. `None` records at the final schedule β.
    #[serde(default)]
    pub read_beta: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            beta_schedule: geometric_schedule(0.1, 50.0, 32),
            sweeps_per_beta: 10,
            n_samples: 100,
            seed: 0,
            read_beta: None,
        }
    }
}

/// `stages` values from `start` to `end`, evenly spaced in log β.
pub fn geometric_schedule(start: f64, end: f64, stages: usize) -> Vec<f64> {
    match stages {
        0 => Vec::new(),
        1 => vec![end],
        _ => {
            let ratio = (end / start).powf(1.0 / (stages - 1) as f64);
            (0..stages)
                .map(|s| if s + 1 == stages { end } else { start * ratio.powi(s as i32) })
                .collect()
        }
    }
}

impl SamplerConfig {
    /// Plain Gibbs sampling at a single β.
    pub fn fixed_beta(beta: f64, sweeps: usize, n_samples: usize) -> Self {
        SamplerConfig {
            beta_schedule: vec![beta],
            sweeps_per_beta: sweeps,
            n_samples,
            seed: 0,
            read_beta: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, n_samples: usize) -> Self {
        self.n_samples = n_samples;
        self
    }

    pub fn final_beta(&self) -> f64 {
        self.read_beta
            .unwrap_or_else(|| self.beta_schedule.last().copied().unwrap_or(0.0))
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.n_samples == 0 {
            return Err(SamplerError::InvalidConfig("n_samples must be at least 1".into()));
        }
        if self.beta_schedule.is_empty() {
            return Err(SamplerError::InvalidConfig("beta schedule is empty".into()));
        }
        let all_beta = self.beta_schedule.iter().chain(self.read_beta.iter());
        if all_beta.clone().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(SamplerError::InvalidConfig(
                "inverse temperatures must be finite and nonnegative".into(),
            ));
        }
        if self.beta_schedule.windows(2).any(|w| w[1] < w[0]) {
            return Err(SamplerError::InvalidConfig("beta schedule must be nondecreasing".into()));
        }
        Ok(())
    }
}

/// Samples with their effective-model energies, in replica order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub samples: Vec<BinaryVector>,
    pub energies: Vec<f64>,
    pub sampler_id: String,
}

impl SampleBatch {
    /// Builds a batch and computes every energy from `model`.
    pub fn from_samples(model: &EffectiveModel, samples: Vec<BinaryVector>, sampler_id: impl Into<String>) -> Self {
        let energies = samples.iter().map(|q| model.energy(q.as_slice())).collect();
        SampleBatch {
            samples,
            energies,
            sampler_id: sampler_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_energy(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.energies.len().max(1) as f64
    }

    pub fn min_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A pluggable sampler backend used by the solver.
pub trait Sampler: Send + Sync {
    fn id(&self) -> String;

    /// Draws a batch from `model`; `seed` overrides any configured seed.
    fn sample(&self, model: &EffectiveModel, seed: u64) -> Result<SampleBatch, SamplerError>;
}

/// Returns the exact minimizer as a single-sample batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSampler;

impl Sampler for ExactSampler {
    fn id(&self) -> String {
        "exact".into()
    }

    fn sample(&self, model: &EffectiveModel, _seed: u64) -> Result<SampleBatch, SamplerError> {
        let q = exact_field_minimize(model)?;
        Ok(SampleBatch::from_samples(model, vec![q], self.id()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct GibbsSampler {
    pub config: SamplerConfig,
}

impl GibbsSampler {
    pub fn new(config: SamplerConfig) -> Self {
        GibbsSampler { config }
    }
}

impl Sampler for GibbsSampler {
    fn id(&self) -> String {
        "gibbs".into()
    }

    fn sample(&self, model: &EffectiveModel, seed: u64) -> Result<SampleBatch, SamplerError> {
        gibbs_sample(model, &self.config.clone().with_seed(seed))
    }
}

#[derive(Debug, Clone, Default)]
pub struct OnehotGibbsSampler {
    pub config: SamplerConfig,
}

impl OnehotGibbsSampler {
    pub fn new(config: SamplerConfig) -> Self {
        OnehotGibbsSampler { config }
    }
}

impl Sampler for OnehotGibbsSampler {
    fn id(&self) -> String {
        "onehot_gibbs".into()
    }

    fn sample(&self, model: &EffectiveModel, seed: u64) -> Result<SampleBatch, SamplerError> {
        onehot_gibbs_sample(model, &self.config.clone().with_seed(seed))
    }
}

/// Independent Bernoulli / per-group categorical draws from the closed-form
/// field-only distribution at `beta`.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    pub beta: f64,
    pub n_samples: usize,
}

impl Sampler for FieldSampler {
    fn id(&self) -> String {
        "field".into()
    }

    fn sample(&self, model: &EffectiveModel, seed: u64) -> Result<SampleBatch, SamplerError> {
        let cfg = SamplerConfig::fixed_beta(self.beta, 1, self.n_samples).with_seed(seed);
        if !model.is_field_only() {
            return Err(SamplerError::QuadraticTerms);
        }
        onehot_gibbs_sample(model, &cfg)
    }
}

fn require_field_only(m: &EffectiveModel) -> Result<(), SamplerError> {
    if m.is_field_only() {
        Ok(())
    } else {
        Err(SamplerError::QuadraticTerms)
    }
}

/// Exact minimizer of a field-only model: `q_i = 1` iff its coefficient is
/// negative, and the lowest coefficient (lowest index on ties) inside each
/// one-hot group.
pub fn exact_field_minimize(m: &EffectiveModel) -> Result<BinaryVector, SamplerError> {
    require_field_only(m)?;
    let lin = m.objective.dense_linear(m.n_vars);
    let mut q: Vec<u8> = lin.iter().map(|&c| u8::from(c < 0.0)).collect();
    for g in &m.onehot_groups {
        let mut best = g[0];
        for &i in g {
            if lin[i] < lin[best] || (lin[i] == lin[best] && i < best) {
                best = i;
            }
        }
        for &i in g {
            q[i] = u8::from(i == best);
        }
    }
    Ok(BinaryVector::from_raw(q))
}

/// Logistic function `1 / (1 + exp(-x))`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-variable means `<q_i>` of the field-only Boltzmann distribution.
/// Grouped variables get a softmax within their group.
pub fn exact_field_expectation(m: &EffectiveModel, beta: f64) -> Result<Vec<f64>, SamplerError> {
    require_field_only(m)?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(SamplerError::InvalidConfig(format!("beta must be finite and nonnegative, got {beta}")));
    }
    let lin = m.objective.dense_linear(m.n_vars);
    let mut mean: Vec<f64> = lin.iter().map(|&c| logistic(-beta * c)).collect();
    for g in &m.onehot_groups {
        let probs = softmax(g.iter().map(|&i| -beta * lin[i]));
        for (&i, p) in g.iter().zip(probs) {
            mean[i] = p;
        }
    }
    Ok(mean)
}

pub(crate) fn softmax(logits: impl Iterator<Item = f64>) -> Vec<f64> {
    let logits: Vec<f64> = logits.collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|&l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Empirical mean of every `F_k` over the batch.
pub fn estimate_expectations(batch: &SampleBatch, p: &ConstrainedProblem) -> Result<Vec<f64>, SamplerError> {
    if batch.is_empty() {
        return Err(SamplerError::EmptyBatch);
    }
    let mut acc = vec![0.0; p.n_constraints()];
    for q in &batch.samples {
        for (a, v) in acc.iter_mut().zip(p.constraint_values(q)?) {
            *a += v;
        }
    }
    let n = batch.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// `<F_k>` from per-variable means; exact because every `F_k` is linear.
pub fn expectations_from_means(p: &ConstrainedProblem, means: &[f64]) -> Vec<f64> {
    p.constraints().iter().map(|c| c.value_fractional(means)).collect()
}
