use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::{create_run_dir, read_json, write_json, write_spec};
use super::{
    endpoint_from_env, instantiate_all, solve_replica, thread_pool, HarnessError, Instance, ReplicaSeeds, RunSpec,
    SamplerSpec,
};
use crate::model::BinaryVector;
use crate::problems::{deterministic_baseline, shortest_path_baseline, TrafficInstance};
use crate::samplers::{AnnealerClient, MockAnnealerServer, OnehotGibbsSampler, Sampler};

/// Column order of every comparison entry.
pub const TRAFFIC_METHODS: [&str; 4] = ["shortest_path", "deterministic", "classical", "annealer"];

/// One method's outcome. `cost` and `feasible` are absent when the method
/// could not run, with the reason in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub cost: Option<f64>,
    pub feasible: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MethodResult {
    fn assignment(method: &str, t: &TrafficInstance, q: &BinaryVector) -> Self {
        MethodResult {
            method: method.into(),
            cost: Some(t.cost(q)),
            feasible: Some(t.is_assignment(q)),
            error: None,
        }
    }

    fn absent(method: &str, error: impl ToString) -> Self {
        MethodResult {
            method: method.into(),
            cost: None,
            feasible: None,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceComparison {
    pub replica: usize,
    pub seeds: ReplicaSeeds,
    pub methods: Vec<MethodResult>,
}

impl InstanceComparison {
    pub fn cost(&self, method: &str) -> Option<f64> {
        self.methods.iter().find(|m| m.method == method).and_then(|m| m.cost)
    }
}

/// Contents of `comparison.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub instances: Vec<InstanceComparison>,
    /// Mean cost per method over the instances where it ran.
    pub mean_cost: BTreeMap<String, Option<f64>>,
    pub dir: PathBuf,
}

impl Comparison {
    fn validate(&self) -> Result<(), HarnessError> {
        for ic in &self.instances {
            let names: Vec<&str> = ic.methods.iter().map(|m| m.method.as_str()).collect();
            if names != TRAFFIC_METHODS {
                return Err(HarnessError::Validation(format!("replica {} lists methods {names:?}", ic.replica)));
            }
            for m in &ic.methods {
                if m.cost.is_some() != m.feasible.is_some() || m.cost.is_none() != m.error.is_some() {
                    return Err(HarnessError::Validation(format!(
                        "replica {} method {} is half-populated",
                        ic.replica, m.method
                    )));
                }
            }
        }
        Ok(())
    }
}

fn sampled(
    method: &str,
    spec: &RunSpec,
    r: usize,
    seeds: ReplicaSeeds,
    inst: &Instance,
    t: &TrafficInstance,
    sampler: &dyn Sampler,
) -> MethodResult {
    match solve_replica(spec, r, seeds, inst, sampler) {
        Ok((report, _)) => MethodResult::assignment(method, t, &report.result.incumbent),
        Err(e) => MethodResult::absent(method, e),
    }
}

/// Runs the four traffic methods on every replica instance and writes
/// `comparison.json`:
///
/// * `shortest_path`: every car on its shortest candidate route.
/// * `deterministic`: exact minimization of the linearized model with
///   multiplier updates from the expected loads.
/// * `classical`: dual ascent with the one-hot Gibbs sampler.
/// * `annealer`: dual ascent through the HTTP annealer client.
///
/// The annealer endpoint comes from an `external` sampler spec, then
/// `$LAGRANGE_ANNEALER_ADDR`, then an in-process mock server. If none can be
/// reached that column is marked absent and the others are still produced.
pub fn compare_traffic(spec: &RunSpec, jobs: usize) -> Result<Comparison, HarnessError> {
    if spec.experiment.name() != "traffic" {
        return Err(HarnessError::InvalidSpec(format!(
            "compare-traffic needs a traffic experiment, got {}",
            spec.experiment.name()
        )));
    }
    let spec = spec.resolve()?;
    let config = spec
        .sampler
        .config()
        .cloned()
        .ok_or_else(|| HarnessError::InvalidSpec("compare-traffic needs a sampler with a SamplerConfig".into()))?;
    let instances = instantiate_all(&spec)?;
    let dir = create_run_dir(&spec.output_dir, "compare-traffic")?;
    write_spec(&dir, &spec)?;

    let classical = OnehotGibbsSampler::new(config.clone());
    let explicit = match &spec.sampler {
        SamplerSpec::External { endpoint, .. } => endpoint.clone(),
        _ => None,
    };
    let mut server = None;
    let endpoint = match explicit.or_else(endpoint_from_env) {
        Some(e) => Ok(e),
        None => match MockAnnealerServer::with_config("127.0.0.1:0", config.clone()) {
            Ok(s) => {
                let e = s.endpoint();
                server = Some(s);
                Ok(e)
            }
            Err(e) => Err(format!("mock annealer unavailable: {e}")),
        },
    };
    let annealer = endpoint.map(|e| AnnealerClient::new(e, config.clone()));
    let seeds = spec.seeds();

    let entries = thread_pool(jobs)?.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(r, inst)| {
                let t = inst.traffic.as_ref().expect("traffic instances carry their routes");
                let nu0 = spec.initial_nu.state(inst.problem.n_constraints())?;
                let deterministic = match deterministic_baseline(t, &nu0) {
                    Ok(q) => MethodResult::assignment("deterministic", t, &q),
                    Err(e) => MethodResult::absent("deterministic", e),
                };
                let annealed = match &annealer {
                    Ok(c) => sampled("annealer", &spec, r, seeds[r], inst, t, c),
                    Err(msg) => MethodResult::absent("annealer", msg),
                };
                Ok(InstanceComparison {
                    replica: r,
                    seeds: seeds[r],
                    methods: vec![
                        MethodResult::assignment("shortest_path", t, &shortest_path_baseline(t)),
                        deterministic,
                        sampled("classical", &spec, r, seeds[r], inst, t, &classical),
                        annealed,
                    ],
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    drop(server);

    let mean_cost = TRAFFIC_METHODS
        .iter()
        .map(|&m| {
            let costs: Vec<f64> = entries.iter().filter_map(|e| e.cost(m)).collect();
            let mean = (!costs.is_empty()).then(|| costs.iter().sum::<f64>() / costs.len() as f64);
            (m.to_string(), mean)
        })
        .collect();
    let cmp = Comparison {
        instances: entries,
        mean_cost,
        dir: dir.clone(),
    };
    cmp.validate()?;
    let path = dir.join("comparison.json");
    write_json(&path, &cmp)?;
    let back: Comparison = read_json(&path)?;
    if back != cmp {
        return Err(HarnessError::Validation(format!("{} does not round-trip", path.display())));
    }
    back.validate()?;
    Ok(cmp)
}
