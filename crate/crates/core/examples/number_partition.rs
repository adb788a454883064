//! Balanced two-way split of `n_i = i / N`, driven by plain Gibbs draws at
//! beta = 1. Prints the partition residual against the sampling-noise unit.
//!
//!     cargo run --release --example number_partition -- 200

use lagrange_anneal::dual_ascent::solve;
use lagrange_anneal::harness::presets;
use lagrange_anneal::problems::{partition_numbers, partition_residual_unit};

fn main() {
    let n: usize = std::env::args().nth(1).map_or(200, |a| a.parse().expect("N"));
    let spec = presets::number_partition(n, n).with_replicas(5);
    let handle = spec.sampler.build().unwrap();
    for (r, seeds) in spec.seeds().into_iter().enumerate() {
        let inst = spec.experiment.instantiate(seeds.instance).unwrap();
        let nu0 = spec.initial_nu.state(1).unwrap();
        let mut cfg = spec.solver.clone();
        cfg.seed = seeds.solver;
        let res = solve(&inst.problem, handle.sampler.as_ref(), &nu0, &cfg).unwrap();
        let nums = partition_numbers(&inst.problem);
        let split: f64 = nums
            .iter()
            .zip(res.incumbent.as_slice())
            .map(|(x, &b)| if b == 1 { *x } else { -*x })
            .sum();
        println!(
            "instance {r}: |residual| {:.3e} (unit {:.3e}) in {} iterations",
            split.abs(),
            partition_residual_unit(n),
            res.iterations_used
        );
    }
}
