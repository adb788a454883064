use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::mock_server::model_to_wire;
use super::{SampleBatch, Sampler, SamplerConfig, SamplerError};
use crate::model::{BinaryVector, EffectiveModel, ProblemDocument};

/// Body of `POST /sample`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRequest {
    pub model: ProblemDocument,
    pub num_reads: usize,
    pub seed: u64,
}

/// Response body; bits arrive as integers and are range-checked locally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleResponse {
    pub samples: Vec<Vec<i64>>,
}

/// How one-hot groups are shipped to the annealer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", content = "weight")]
pub enum OnehotPenalty {
    /// Sent as hard constraints, enforced by the annealer.
    #[default]
    Infinite,
    /// Folded into the QUBO with a weight that dominates any single-variable
    /// energy change.
    Auto,
    Fixed(f64),
}

/// Blocking client for the external annealer wire protocol.
#[derive(Debug, Clone)]
pub struct AnnealerClient {
    pub endpoint: String,
    pub config: SamplerConfig,
    pub onehot_penalty: OnehotPenalty,
    pub max_retries: usize,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl AnnealerClient {
    pub fn new(endpoint: impl Into<String>, config: SamplerConfig) -> Self {
        AnnealerClient {
            endpoint: endpoint.into(),
            config,
            onehot_penalty: OnehotPenalty::Infinite,
            max_retries: 3,
            backoff: Duration::from_millis(100),
            timeout: Duration::from_secs(60),
        }
    }

    pub fn with_onehot_penalty(mut self, p: OnehotPenalty) -> Self {
        self.onehot_penalty = p;
        self
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.starts_with("http://") || base.starts_with("https://") {
            format!("{base}/sample")
        } else {
            format!("http://{base}/sample")
        }
    }

    fn onehot_weight(&self, m: &EffectiveModel) -> Option<f64> {
        match self.onehot_penalty {
            OnehotPenalty::Infinite => None,
            OnehotPenalty::Fixed(w) => Some(w),
            OnehotPenalty::Auto => {
                let mut scale = m.objective.dense_linear(m.n_vars).iter().map(|c| c.abs()).collect::<Vec<_>>();
                for (&(i, j), &c) in m.objective.quadratic() {
                    scale[i] += c.abs();
                    scale[j] += c.abs();
                }
                Some(2.0 * (1.0 + scale.into_iter().fold(0.0, f64::max)))
            }
        }
    }

    fn post(&self, body: &str) -> Result<String, SamplerError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let url = self.url();
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let sent = agent
                .post(&url)
                .header("Content-Type", "application/json")
                .send(body);
            match sent {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status != 200 {
                        return Err(SamplerError::Status(status));
                    }
                    return resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| SamplerError::MalformedResponse(e.to_string()));
                }
                Err(_) if attempt <= self.max_retries => {
                    thread::sleep(delay);
                    delay *= 2;
                }
                Err(e) => {
                    return Err(SamplerError::Network {
                        attempts: attempt,
                        message: e.to_string(),
                    })
                }
            }
        }
    }

    /// Submits `m` and validates the returned batch. Energies are recomputed
    /// locally against `m`.
    pub fn submit(&self, m: &EffectiveModel, seed: u64) -> Result<SampleBatch, SamplerError> {
        self.config.validate()?;
        let request = SampleRequest {
            model: model_to_wire(m, self.onehot_weight(m)),
            num_reads: self.config.n_samples,
            seed,
        };
        let body = serde_json::to_string(&request).expect("requests always serialize");
        let text = self.post(&body)?;
        let resp: SampleResponse =
            serde_json::from_str(&text).map_err(|e| SamplerError::MalformedResponse(e.to_string()))?;
        parse_samples(m, resp)
    }
}

fn parse_samples(m: &EffectiveModel, resp: SampleResponse) -> Result<SampleBatch, SamplerError> {
    if resp.samples.is_empty() {
        return Err(SamplerError::MalformedResponse("no samples".into()));
    }
    let mut samples = Vec::with_capacity(resp.samples.len());
    for (index, raw) in resp.samples.into_iter().enumerate() {
        if raw.len() != m.n_vars {
            return Err(SamplerError::SampleLength {
                index,
                expected: m.n_vars,
                actual: raw.len(),
            });
        }
        if let Some(bad) = raw.iter().find(|&&b| b != 0 && b != 1) {
            return Err(SamplerError::MalformedResponse(format!("sample {index} has bit value {bad}")));
        }
        samples.push(BinaryVector::from_raw(raw.into_iter().map(|b| b as u8).collect()));
    }
    Ok(SampleBatch::from_samples(m, samples, "annealer"))
}

impl Sampler for AnnealerClient {
    fn id(&self) -> String {
        "annealer".into()
    }

    fn sample(&self, model: &EffectiveModel, seed: u64) -> Result<SampleBatch, SamplerError> {
        self.submit(model, seed)
    }
}

/// Submits `m` to `endpoint` with the default client settings.
pub fn external_annealer_submit(
    m: &EffectiveModel,
    cfg: &SamplerConfig,
    endpoint: &str,
) -> Result<SampleBatch, SamplerError> {
    AnnealerClient::new(endpoint, cfg.clone()).submit(m, cfg.seed)
}
