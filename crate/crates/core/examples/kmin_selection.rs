//! Pick the K smallest of N random fields under a single cardinality
//! constraint, with the exact field minimizer as the sampler.
//!
//!     cargo run --release --example kmin_selection -- 2000 5

use lagrange_anneal::dual_ascent::solve;
use lagrange_anneal::harness::presets;
use lagrange_anneal::model::MultiplierState;
use lagrange_anneal::problems::{gen_kmin, kmin_fields, kmin_oracle};
use lagrange_anneal::samplers::ExactSampler;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let (n, k) = (args.first().copied().unwrap_or(2000), args.get(1).copied().unwrap_or(5));
    let cfg = presets::kmin(n, k).solver;
    for seed in 0..5 {
        let p = gen_kmin(n, k, seed).unwrap();
        let want = kmin_oracle(&kmin_fields(&p), k);
        let res = solve(&p, &ExactSampler, &MultiplierState::zeros(1), &cfg).unwrap();
        println!(
            "seed {seed}: energy {:.6} oracle {want:.6} ones {} after {} iterations, nu {:.6}",
            res.incumbent_energy,
            res.incumbent.count_ones(),
            res.iterations_used,
            res.final_nu[0]
        );
    }
}
