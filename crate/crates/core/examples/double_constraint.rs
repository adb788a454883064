//! L x L assignment problem (one-hot rows and columns) solved with
//! closed-form soft means and compared against the Hungarian optimum.
//!
//!     cargo run --release --example double_constraint -- 6

use lagrange_anneal::dual_ascent::solve;
use lagrange_anneal::harness::presets;

fn main() {
    let l: usize = std::env::args().nth(1).map_or(6, |a| a.parse().expect("L"));
    let spec = presets::double_constraint(l);
    let handle = spec.sampler.build().unwrap();
    for seed in 0..5 {
        let inst = spec.experiment.instantiate(seed).unwrap();
        let nu0 = spec.initial_nu.state(inst.problem.n_constraints()).unwrap();
        let mut cfg = spec.solver.clone();
        cfg.seed = seed;
        let res = solve(&inst.problem, handle.sampler.as_ref(), &nu0, &cfg).unwrap();
        println!(
            "seed {seed}: cost {:.4} optimum {:.4} feasible {} after {} iterations",
            res.incumbent_energy,
            inst.optimum.unwrap(),
            res.incumbent_feasible,
            res.iterations_used
        );
    }
}
