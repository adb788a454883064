use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{logistic, SampleBatch, SamplerConfig, SamplerError};
use crate::model::{BinaryVector, EffectiveModel};

/// Dense fields plus adjacency lists, built once per sampler call.
pub(crate) struct Compiled {
    pub linear: Vec<f64>,
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub field_only: bool,
}

impl Compiled {
    pub fn new(m: &EffectiveModel) -> Self {
        let mut neighbors = vec![Vec::new(); m.n_vars];
        for (&(i, j), &c) in m.objective.quadratic() {
            if c != 0.0 {
                neighbors[i].push((j, c));
                neighbors[j].push((i, c));
            }
        }
        Compiled {
            linear: m.objective.dense_linear(m.n_vars),
            field_only: neighbors.iter().all(Vec::is_empty),
            neighbors,
        }
    }

    /// Energy change of setting `q_i = 1` versus `q_i = 0`.
    pub fn local_field(&self, i: usize, q: &[u8]) -> f64 {
        let mut d = self.linear[i];
        for &(j, c) in &self.neighbors[i] {
            if q[j] == 1 {
                d += c;
            }
        }
        d
    }
}

pub(crate) fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ replica as u64)
}

pub(crate) fn random_bits(n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.gen::<bool>())).collect()
}

/// A single heat-bath chain, exposed for long-run distribution checks.
pub struct GibbsChain {
    model: Compiled,
    state: Vec<u8>,
    rng: ChaCha8Rng,
}

impl GibbsChain {
    /// Starts from a uniformly random configuration.
    pub fn new(m: &EffectiveModel, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_bits(m.n_vars, &mut rng);
        GibbsChain {
            model: Compiled::new(m),
            state,
            rng,
        }
    }

    /// One ascending-index heat-bath sweep at inverse temperature `beta`.
    pub fn sweep(&mut self, beta: f64) {
        for i in 0..self.state.len() {
            let p1 = logistic(-beta * self.model.local_field(i, &self.state));
            self.state[i] = u8::from(self.rng.gen::<f64>() < p1);
        }
    }

    pub fn state(&self) -> &[u8] {
        &self.state
    }
}

/// Heat-bath simulated annealing with `n_samples` independent restarts.
///
/// One-hot groups are not enforced here; use
/// [`onehot_gibbs_sample`](super::onehot_gibbs_sample) for that. On a
/// field-only model every variable is independent at every β, so a single
/// sweep at the read β already yields an exact draw and the schedule is
/// skipped.
pub fn gibbs_sample(m: &EffectiveModel, cfg: &SamplerConfig) -> Result<SampleBatch, SamplerError> {
    cfg.validate()?;
    let compiled = Compiled::new(m);
    let read = cfg.final_beta();
    let last = *cfg.beta_schedule.last().expect("validated nonempty");

    let samples: Vec<BinaryVector> = if compiled.field_only {
        let p1: Vec<f64> = compiled.linear.iter().map(|&c| logistic(-read * c)).collect();
        (0..cfg.n_samples)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(cfg.seed, r);
                BinaryVector::from_raw(p1.iter().map(|&p| u8::from(rng.gen::<f64>() < p)).collect())
            })
            .collect()
    } else {
        (0..cfg.n_samples)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(cfg.seed, r);
                let mut q = random_bits(m.n_vars, &mut rng);
                let mut run = |beta: f64, q: &mut Vec<u8>| {
                    for _ in 0..cfg.sweeps_per_beta {
                        for i in 0..q.len() {
                            let p1 = logistic(-beta * compiled.local_field(i, q));
                            q[i] = u8::from(rng.gen::<f64>() < p1);
                        }
                    }
                };
                for &beta in &cfg.beta_schedule {
                    run(beta, &mut q);
                }
                if read != last {
                    run(read, &mut q);
                }
                BinaryVector::from_raw(q)
            })
            .collect()
    };
    Ok(SampleBatch::from_samples(m, samples, "gibbs"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QuadraticObjective;

    #[test]
    fn unbiased_coin() {
        let m = EffectiveModel::new(1, QuadraticObjective::new(), vec![]).unwrap();
        let cfg = SamplerConfig::fixed_beta(3.0, 1, 4000).with_seed(11);
        let b = gibbs_sample(&m, &cfg).unwrap();
        let mean = b.samples.iter().map(|q| f64::from(q.get(0))).sum::<f64>() / 4000.0;
        let sigma = (0.25f64 / 4000.0).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn ferromagnetic_pair_concentrates() {
        let mut obj = QuadraticObjective::new();
        obj.add_quadratic(0, 1, -1.0);
        obj.add_linear(0, 0.5);
        obj.add_linear(1, 0.5);
        let m = EffectiveModel::new(2, obj, vec![]).unwrap();
        let cfg = SamplerConfig::default().with_samples(200).with_seed(5);
        let b = gibbs_sample(&m, &cfg).unwrap();
        assert!(b.samples.iter().all(|q| q.get(0) == q.get(1)));
    }

    #[test]
    fn deterministic_and_energy_consistent() {
        let mut obj = QuadraticObjective::from_linear(&[0.3, -0.2, 0.1, -0.7]);
        obj.add_quadratic(0, 3, 0.9);
        obj.add_quadratic(1, 2, -0.4);
        let m = EffectiveModel::new(4, obj, vec![]).unwrap();
        let cfg = SamplerConfig::default().with_samples(50).with_seed(99);
        let a = gibbs_sample(&m, &cfg).unwrap();
        let b = gibbs_sample(&m, &cfg).unwrap();
        assert_eq!(a, b);
        for (q, e) in a.samples.iter().zip(&a.energies) {
            assert!((m.energy(q.as_slice()) - e).abs() <= 1e-9 * e.abs().max(1.0));
        }
    }

    #[test]
    fn zero_temperature_matches_exact_minimizer() {
        let lin = [0.4, -0.1, 0.25, -0.8, 0.05];
        let m = EffectiveModel::new(5, QuadraticObjective::from_linear(&lin), vec![]).unwrap();
        let exact = super::super::exact_field_minimize(&m).unwrap();
        let mut cfg = SamplerConfig::default().with_samples(500).with_seed(3);
        cfg.read_beta = Some(50.0 / 0.05);
        let b = gibbs_sample(&m, &cfg).unwrap();
        let hits = b.samples.iter().filter(|q| **q == exact).count();
        assert!(hits * 100 >= 99 * 500, "{hits}");
    }
}
