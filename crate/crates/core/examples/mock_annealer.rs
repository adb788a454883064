//! Drives the solver through the HTTP annealer client against an in-process
//! mock server. Set LAGRANGE_ANNEALER_ADDR to use an external one instead.
//!
//!     cargo run --release --example mock_annealer

use lagrange_anneal::dual_ascent::solve;
use lagrange_anneal::harness::{presets, ANNEALER_ENV};
use lagrange_anneal::samplers::{AnnealerClient, MockAnnealerServer, SamplerConfig};

fn main() {
    let config = SamplerConfig::fixed_beta(2.0, 5, 20);
    let mut server = None;
    let endpoint = std::env::var(ANNEALER_ENV).unwrap_or_else(|_| {
        let s = MockAnnealerServer::with_config("127.0.0.1:0", config.clone()).unwrap();
        let e = s.endpoint();
        server = Some(s);
        e
    });
    println!("annealer at {endpoint}");
    let client = AnnealerClient::new(endpoint, config);
    let spec = presets::traffic(4, 5);
    let inst = spec.experiment.instantiate(0).unwrap();
    let t = inst.traffic.as_ref().unwrap();
    let nu0 = spec.initial_nu.state(inst.problem.n_constraints()).unwrap();
    let res = solve(&inst.problem, &client, &nu0, &spec.solver).unwrap();
    println!("route cost {:.1} after {} annealer calls", t.cost(&res.incumbent), res.iterations_used);
    drop(server);
}
