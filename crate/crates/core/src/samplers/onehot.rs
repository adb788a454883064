use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gibbs::{random_bits, replica_rng, Compiled};
use super::{logistic, SampleBatch, SamplerConfig, SamplerError};
use crate::model::{check_groups, BinaryVector, EffectiveModel};

enum Unit {
    Single(usize),
    Group(Vec<usize>),
}

fn units(m: &EffectiveModel) -> Vec<Unit> {
    let mut grouped = vec![false; m.n_vars];
    let mut out: Vec<(usize, Unit)> = Vec::new();
    for g in &m.onehot_groups {
        for &i in g {
            grouped[i] = true;
        }
        if let Some(&first) = g.iter().min() {
            out.push((first, Unit::Group(g.clone())));
        }
    }
    out.extend((0..m.n_vars).filter(|&i| !grouped[i]).map(|i| (i, Unit::Single(i))));
    out.sort_by_key(|(first, _)| *first);
    out.into_iter().map(|(_, u)| u).collect()
}

fn pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

struct Hopper<'a> {
    compiled: &'a Compiled,
    units: &'a [Unit],
}

impl Hopper<'_> {
    fn init(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
        let mut q = random_bits(n, rng);
        for u in self.units {
            if let Unit::Group(g) = u {
                let pick = rng.gen_range(0..g.len());
                for (k, &i) in g.iter().enumerate() {
                    q[i] = u8::from(k == pick);
                }
            }
        }
        q
    }

    fn sweep(&self, beta: f64, q: &mut [u8], rng: &mut ChaCha8Rng, scratch: &mut Vec<f64>) {
        for u in self.units {
            match u {
                Unit::Single(i) => {
                    let p1 = logistic(-beta * self.compiled.local_field(*i, q));
                    q[*i] = u8::from(rng.gen::<f64>() < p1);
                }
                Unit::Group(g) => {
                    for &i in g {
                        q[i] = 0;
                    }
                    scratch.clear();
                    scratch.extend(g.iter().map(|&i| self.compiled.local_field(i, q)));
                    let low = scratch.iter().copied().fold(f64::INFINITY, f64::min);
                    for e in scratch.iter_mut() {
                        *e = (-beta * (*e - low)).exp();
                    }
                    q[g[pick(scratch, rng)]] = 1;
                }
            }
        }
    }
}

/// Heat-bath sampling that keeps every one-hot group exactly satisfied.
///
/// Each group is resampled as a categorical variable with weights
/// `exp(-beta * E_option)`; ungrouped variables use single-site heat-bath.
/// Units are visited in order of their smallest index. Field-only models
/// skip the schedule as in [`gibbs_sample`](super::gibbs_sample).
pub fn onehot_gibbs_sample(m: &EffectiveModel, cfg: &SamplerConfig) -> Result<SampleBatch, SamplerError> {
    cfg.validate()?;
    check_groups(m.n_vars, &m.onehot_groups)?;
    let compiled = Compiled::new(m);
    let units = units(m);
    let hopper = Hopper {
        compiled: &compiled,
        units: &units,
    };
    let read = cfg.final_beta();
    let last = *cfg.beta_schedule.last().expect("validated nonempty");
    let samples: Vec<BinaryVector> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(cfg.seed, r);
            let mut q = hopper.init(m.n_vars, &mut rng);
            let mut scratch = Vec::new();
            if compiled.field_only {
                hopper.sweep(read, &mut q, &mut rng, &mut scratch);
            } else {
                for &beta in &cfg.beta_schedule {
                    for _ in 0..cfg.sweeps_per_beta {
                        hopper.sweep(beta, &mut q, &mut rng, &mut scratch);
                    }
                }
                if read != last {
                    for _ in 0..cfg.sweeps_per_beta {
                        hopper.sweep(read, &mut q, &mut rng, &mut scratch);
                    }
                }
            }
            assert!(m.satisfies_groups(&q), "one-hot group violated");
            BinaryVector::from_raw(q)
        })
        .collect();
    Ok(SampleBatch::from_samples(m, samples, "onehot_gibbs"))
}
