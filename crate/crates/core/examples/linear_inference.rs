//! Recover a binary vector from M noiseless Gaussian measurements. Above the
//! recovery threshold the truth comes back exactly; below it the ground
//! state is degenerate.
//!
//!     cargo run --release --example linear_inference -- 200 160

use lagrange_anneal::dual_ascent::solve;
use lagrange_anneal::harness::presets;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let (n, m) = (args.first().copied().unwrap_or(200), args.get(1).copied().unwrap_or(160));
    let spec = presets::linear_system(n, m);
    let handle = spec.sampler.build().unwrap();
    for seed in 0..5 {
        let inst = spec.experiment.instantiate(seed).unwrap();
        let nu0 = spec.initial_nu.state(inst.problem.n_constraints()).unwrap();
        let res = solve(&inst.problem, handle.sampler.as_ref(), &nu0, &spec.solver).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        println!(
            "seed {seed}: mse {:.4} feasible {} in {} iterations",
            res.incumbent.mse(truth),
            res.incumbent_feasible,
            res.iterations_used
        );
    }
}
