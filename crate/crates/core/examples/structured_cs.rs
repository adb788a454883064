//! Compressed sensing of a connected blob on a 16x16 grid, with and without
//! the attractive neighbour prior.
//!
//!     cargo run --release --example structured_cs

use lagrange_anneal::dual_ascent::solve;
use lagrange_anneal::harness::presets;
use lagrange_anneal::problems::GridPrior;

fn main() {
    for (label, prior) in [("prior", GridPrior::default()), ("no prior", GridPrior::None)] {
        let spec = presets::structured_cs(prior);
        let handle = spec.sampler.build().unwrap();
        let mut exact = 0;
        for seed in 0..5 {
            let inst = spec.experiment.instantiate(seed).unwrap();
            let nu0 = spec.initial_nu.state(inst.problem.n_constraints()).unwrap();
            let mut cfg = spec.solver.clone();
            cfg.seed = seed;
            let res = solve(&inst.problem, handle.sampler.as_ref(), &nu0, &cfg).unwrap();
            let mse = res.incumbent.mse(inst.truth.as_ref().unwrap());
            exact += usize::from(mse == 0.0);
            println!("{label} seed {seed}: mse {mse:.4} after {} iterations", res.iterations_used);
        }
        println!("{label}: {exact}/5 recovered exactly");
    }
}
