//! Route 50 cars over an 8x8 grid, three candidate routes each, and compare
//! the congestion cost against the shortest-path and deterministic
//! baselines.
//!
//!     cargo run --release --example traffic_flow

use lagrange_anneal::dual_ascent::solve;
use lagrange_anneal::harness::presets;
use lagrange_anneal::problems::{deterministic_baseline, shortest_path_baseline};

fn main() {
    let spec = presets::traffic(8, 50);
    let handle = spec.sampler.build().unwrap();
    let (mut sp, mut det, mut sampled) = (0.0, 0.0, 0.0);
    let runs = 5;
    for seed in 0..runs {
        let inst = spec.experiment.instantiate(seed).unwrap();
        let t = inst.traffic.as_ref().unwrap();
        let nu0 = spec.initial_nu.state(inst.problem.n_constraints()).unwrap();
        let mut cfg = spec.solver.clone();
        cfg.seed = seed;
        let res = solve(&inst.problem, handle.sampler.as_ref(), &nu0, &cfg).unwrap();
        let costs = [
            t.cost(&shortest_path_baseline(t)),
            t.cost(&deterministic_baseline(t, &nu0).unwrap()),
            t.cost(&res.incumbent),
        ];
        println!(
            "seed {seed}: shortest path {:.1}  deterministic {:.1}  sampled {:.1}",
            costs[0], costs[1], costs[2]
        );
        sp += costs[0];
        det += costs[1];
        sampled += costs[2];
    }
    let k = runs as f64;
    println!("mean: shortest path {:.1}  deterministic {:.1}  sampled {:.1}", sp / k, det / k, sampled / k);
}
