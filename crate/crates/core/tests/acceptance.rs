//! Acceptance run: one PASS/FAIL line per criterion, with the thresholds and
//! tolerances pinned below. Exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lagrange_anneal::harness::{self, presets, ReplicaReport, RunSpec};
use lagrange_anneal::problems::{brute_force, kmin_fields, partition_residual_unit, spectral_linearize};
use lagrange_anneal::samplers::{gibbs_sample, onehot_gibbs_sample, SamplerConfig};

use common::*;

// criterion 1
const KMIN_N: usize = 2000;
const KMIN_K: usize = 5;
const KMIN_SEEDS: u64 = 5;
const KMIN_MAX_ITERATIONS: usize = 200;
const KMIN_TIME_LIMIT: Duration = Duration::from_secs(10);
// criterion 2
const NP_LARGE_N: usize = 2000;
const NP_LARGE_RUNS: usize = 20;
const NP_LARGE_MIN_SUCCESS: usize = 19;
const NP_SMALL_N: usize = 20;
const NP_SMALL_RUNS: usize = 100;
const NP_SMALL_ENERGY_TOL: f64 = 1e-12;
// criterion 3
const LIN_N: usize = 200;
const LIN_RUNS: usize = 50;
const LIN_MIN_SUCCESS: usize = 45;
const LIN_LOW_MAX_SUCCESS: usize = 10;
// criterion 4
const CS_RUNS: usize = 20;
const CS_MIN_SUCCESS: usize = 14;
const CS_NO_PRIOR_MAX_SUCCESS: usize = 4;
// criterion 5
const TRAFFIC_INSTANCES: usize = 20;
const TRAFFIC_MIN_WINS: usize = 16;
// criterion 6
const DC_SMALL_L: usize = 6;
const DC_SMALL_RUNS: usize = 100;
const DC_SMALL_MIN_SUCCESS: usize = 95;
const DC_LARGE_L: usize = 45;
const DC_LARGE_RUNS: usize = 10;
const DC_LARGE_MIN_SUCCESS: usize = 9;
const DC_LARGE_MAX_ITERATIONS: usize = 2000;
// criterion 7
const HIST_REPLICAS: usize = 200;
const HIST_MAX_MEDIAN: f64 = 200.0;
// criterion 8
const PROP_MAX_N: usize = 12;
const PROP_REL_TOL: f64 = 1e-9;
const TV_MAX: f64 = 0.02;
const SPECTRAL_MAX_N: usize = 10;
const SPECTRAL_TOL: f64 = 1e-8;
const PROP_TIME_LIMIT: Duration = Duration::from_secs(300);

struct Ctx {
    jobs: usize,
    out: tempfile::TempDir,
    /// Every solved replica, kept for the update-rule check.
    solved: Vec<(RunSpec, ReplicaReport)>,
    failures: usize,
}

impl Ctx {
    fn report(&mut self, id: &str, what: &str, pass: bool, detail: String) {
        println!("{} [{id}] {what}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures += 1;
        }
    }

    fn run(&mut self, spec: RunSpec) -> Vec<ReplicaReport> {
        let spec = spec.with_output_dir(self.out.path());
        let out = harness::run(&spec, self.jobs).expect("run succeeds");
        let resolved = RunSpec::load(&out.dir.join("spec.json")).unwrap();
        for r in &out.reports {
            self.solved.push((resolved.clone(), r.clone()));
        }
        out.reports
    }
}

fn count(reports: &[ReplicaReport], f: impl Fn(&ReplicaReport) -> bool) -> usize {
    reports.iter().filter(|r| f(r)).count()
}

fn kmin(ctx: &mut Ctx) {
    let mut ok = 0;
    let mut slowest = Duration::ZERO;
    let mut worst_iters = 0;
    for seed in 0..KMIN_SEEDS {
        let spec = presets::kmin(KMIN_N, KMIN_K).with_seed(seed);
        let t0 = Instant::now();
        let r = ctx.run(spec.clone()).remove(0);
        let took = t0.elapsed();
        slowest = slowest.max(took);
        worst_iters = worst_iters.max(r.result.iterations_used);
        // compare the chosen index set with the K smallest fields directly, so
        // summation order cannot blur "exactly zero"
        let inst = spec.experiment.instantiate(r.seeds.instance).unwrap();
        let h = kmin_fields(&inst.problem);
        let mut order: Vec<usize> = (0..KMIN_N).collect();
        order.sort_by(|&a, &b| h[a].total_cmp(&h[b]));
        let mut want: Vec<usize> = order[..KMIN_K].to_vec();
        want.sort_unstable();
        let got: Vec<usize> = (0..KMIN_N).filter(|&i| r.result.incumbent.get(i) == 1).collect();
        if got == want && r.result.iterations_used <= KMIN_MAX_ITERATIONS && took < KMIN_TIME_LIMIT {
            ok += 1;
        }
    }
    ctx.report(
        "1",
        "K-min N=2000 K=5 exact_field hits the sorting oracle",
        ok == KMIN_SEEDS as usize,
        format!(
            "{ok}/{KMIN_SEEDS} seeds exact, max {worst_iters} iterations (limit {KMIN_MAX_ITERATIONS}), slowest {:.2}s (limit {}s)",
            slowest.as_secs_f64(),
            KMIN_TIME_LIMIT.as_secs()
        ),
    );
}

fn number_partition(ctx: &mut Ctx) {
    let unit = partition_residual_unit(NP_LARGE_N);
    let reports = ctx.run(presets::number_partition(NP_LARGE_N, NP_LARGE_N).with_replicas(NP_LARGE_RUNS));
    let ok = count(&reports, |r| r.residual_energy.is_some_and(|e| e < unit));
    let worst = reports.iter().filter_map(|r| r.residual_energy).fold(0.0, f64::max);
    ctx.report(
        "2a",
        "number partition N=2000 residual below (1/N)^2/2",
        ok >= NP_LARGE_MIN_SUCCESS,
        format!("{ok}/{NP_LARGE_RUNS} below {unit:e} (need {NP_LARGE_MIN_SUCCESS}), worst {worst:e}"),
    );

    let spec = presets::number_partition(NP_SMALL_N, 100).with_replicas(NP_SMALL_RUNS);
    let reports = ctx.run(spec.clone());
    let mut ok = 0;
    for r in &reports {
        let inst = spec.experiment.instantiate(r.seeds.instance).unwrap();
        let (_, best) = brute_force(&inst.problem).unwrap();
        if r.result.incumbent_feasible && (r.result.incumbent_energy - best).abs() <= NP_SMALL_ENERGY_TOL {
            ok += 1;
        }
    }
    ctx.report(
        "2b",
        "number partition N=20 incumbent equals brute force",
        ok == NP_SMALL_RUNS,
        format!("{ok}/{NP_SMALL_RUNS} equal within {NP_SMALL_ENERGY_TOL:e}"),
    );
}

fn linear_inference(ctx: &mut Ctx) {
    let hi = ctx.run(presets::linear_system(LIN_N, 160).with_replicas(LIN_RUNS));
    let ok = count(&hi, |r| r.mse == Some(0.0));
    ctx.report(
        "3a",
        "linear inference N=200 alpha=0.8 perfect reconstruction",
        ok >= LIN_MIN_SUCCESS,
        format!("{ok}/{LIN_RUNS} with MSE 0 (need {LIN_MIN_SUCCESS})"),
    );
    let lo = ctx.run(presets::linear_system(LIN_N, 80).with_replicas(LIN_RUNS));
    let ok = count(&lo, |r| r.mse == Some(0.0));
    ctx.report(
        "3b",
        "linear inference N=200 alpha=0.4 mostly fails",
        ok <= LIN_LOW_MAX_SUCCESS,
        format!("{ok}/{LIN_RUNS} with MSE 0 (allowed {LIN_LOW_MAX_SUCCESS})"),
    );
}

fn structured_cs(ctx: &mut Ctx) {
    use lagrange_anneal::problems::GridPrior;
    let with = ctx.run(presets::structured_cs(GridPrior::default()).with_replicas(CS_RUNS));
    let without = ctx.run(presets::structured_cs(GridPrior::None).with_replicas(CS_RUNS));
    let a = count(&with, |r| r.mse == Some(0.0));
    let b = count(&without, |r| r.mse == Some(0.0));
    ctx.report(
        "4",
        "structured CS 16x16 alpha=0.6, prior vs no prior",
        a >= CS_MIN_SUCCESS && b <= CS_NO_PRIOR_MAX_SUCCESS,
        format!("with prior {a}/{CS_RUNS} (need {CS_MIN_SUCCESS}), without {b}/{CS_RUNS} (allowed {CS_NO_PRIOR_MAX_SUCCESS})"),
    );
}

fn traffic(ctx: &mut Ctx) {
    let spec = presets::traffic(8, 50)
        .with_replicas(TRAFFIC_INSTANCES)
        .with_output_dir(ctx.out.path());
    let cmp = harness::compare_traffic(&spec, ctx.jobs).expect("comparison runs");
    let wins = cmp
        .instances
        .iter()
        .filter(|i| i.cost("classical").unwrap() <= i.cost("deterministic").unwrap())
        .count();
    let mean = |m: &str| cmp.mean_cost[m].unwrap();
    ctx.report(
        "5",
        "traffic 50 cars x 3 routes ordering",
        mean("classical") < mean("shortest_path") && wins >= TRAFFIC_MIN_WINS,
        format!(
            "mean cost classical {:.1} < shortest path {:.1}; classical <= deterministic on {wins}/{TRAFFIC_INSTANCES} (need {TRAFFIC_MIN_WINS}); deterministic mean {:.1}, annealer mean {:.1}",
            mean("classical"),
            mean("shortest_path"),
            mean("deterministic"),
            mean("annealer")
        ),
    );
    // regularized trajectories for the update-rule check
    ctx.run(presets::traffic(8, 50).with_replicas(3));
}

fn double_constraint(ctx: &mut Ctx) {
    let small = ctx.run(presets::double_constraint(DC_SMALL_L).with_replicas(DC_SMALL_RUNS));
    let ok = count(&small, |r| {
        r.result.incumbent_feasible && r.residual_energy.is_some_and(|e| e <= 1e-9)
    });
    ctx.report(
        "6a",
        "double constraint L=6 matches the Hungarian optimum",
        ok >= DC_SMALL_MIN_SUCCESS,
        format!("{ok}/{DC_SMALL_RUNS} optimal within 1e-9 (need {DC_SMALL_MIN_SUCCESS})"),
    );
    let large = ctx.run(presets::double_constraint(DC_LARGE_L).with_replicas(DC_LARGE_RUNS));
    let ok = count(&large, |r| {
        r.result.incumbent_feasible && r.result.iterations_used <= DC_LARGE_MAX_ITERATIONS
    });
    let worst = large.iter().map(|r| r.residual_energy.unwrap()).fold(0.0, f64::max);
    ctx.report(
        "6b",
        "double constraint L=45 reaches a feasible permutation",
        ok >= DC_LARGE_MIN_SUCCESS,
        format!("{ok}/{DC_LARGE_RUNS} feasible within {DC_LARGE_MAX_ITERATIONS} iterations (need {DC_LARGE_MIN_SUCCESS}); worst gap to optimum {worst:.4}"),
    );
}

fn iteration_histogram(ctx: &mut Ctx) {
    let spec = presets::number_partition(100, 100)
        .with_replicas(HIST_REPLICAS)
        .with_output_dir(ctx.out.path());
    let h = harness::histogram(&spec, ctx.jobs).expect("histogram runs");
    let resolved = RunSpec::load(&h.run.dir.join("spec.json")).unwrap();
    for r in &h.run.reports {
        ctx.solved.push((resolved.clone(), r.clone()));
    }
    let median = h.histogram.median();
    ctx.report(
        "7",
        "iteration histogram N=100 over 200 replicas",
        h.histogram.overflow == 0 && h.run.all_converged() && median.is_some_and(|m| m <= HIST_MAX_MEDIAN),
        format!(
            "{} of {HIST_REPLICAS} never converged, median {} iterations (limit {HIST_MAX_MEDIAN})",
            h.histogram.overflow,
            median.map_or("none".into(), |m| m.to_string())
        ),
    );
}

fn property_suites(ctx: &mut Ctx, elapsed_before: Duration) {
    let t0 = Instant::now();

    // model round trip and effective-model consistency
    let mut worst_eff: f64 = 0.0;
    let mut worst_hs: f64 = 0.0;
    let mut round_trips = true;
    for n in 1..=PROP_MAX_N {
        for seed in 0..3 {
            let p = random_problem(n, seed, false);
            round_trips &= lagrange_anneal::model::ConstrainedProblem::from_json(&p.to_json()).unwrap() == p;
            worst_eff = worst_eff.max(effective_energy_gap(&p, &random_nu(p.n_constraints(), seed)));
            let f = random_problem(n, seed + 100, true);
            round_trips &= lagrange_anneal::model::ConstrainedProblem::from_json(&f.to_json()).unwrap() == f;
            worst_hs = worst_hs.max(penalty_bound_gap(&f, &random_nu(f.n_constraints(), seed)));
        }
    }
    ctx.report(
        "8a",
        "model round trip and effective-model consistency, exhaustive N<=12",
        round_trips && worst_eff <= PROP_REL_TOL && worst_hs <= PROP_REL_TOL,
        format!("round trips {round_trips}; worst relative gap {worst_eff:e} (effective), {worst_hs:e} (penalty at optimal nu); tol {PROP_REL_TOL:e}"),
    );

    // sampler stationarity against enumeration
    let mut worst_tv: f64 = 0.0;
    let cases: [(usize, f64, usize, bool); 6] = [
        (3, 1.0, 100_000, false),
        (6, 1.0, 200_000, false),
        (10, 1.0, 800_000, false),
        (16, 3.0, 1_200_000, false),
        (6, 1.0, 200_000, true),
        (12, 2.0, 400_000, true),
    ];
    for (i, &(n, beta, samples, grouped)) in cases.iter().enumerate() {
        let mut r = rng(i as u64);
        let f0 = random_objective(&mut r, n, 0.4);
        let groups = if grouped { vec![(0..3).collect(), (3..6).collect()] } else { vec![] };
        let m = lagrange_anneal::model::EffectiveModel::new(n, f0, groups).unwrap();
        let cfg = SamplerConfig::fixed_beta(beta, 20, samples).with_seed(i as u64 + 7);
        let batch = if grouped { onehot_gibbs_sample(&m, &cfg) } else { gibbs_sample(&m, &cfg) }.unwrap();
        worst_tv = worst_tv.max(tv_distance(&batch, &boltzmann(&m, beta)));
    }
    ctx.report(
        "8b",
        "Gibbs samplers match exact Boltzmann laws, N<=16",
        worst_tv <= TV_MAX,
        format!("worst TV {worst_tv:.4} over {} models (limit {TV_MAX})", cases.len()),
    );

    // spectral linearization
    let mut worst_sp: f64 = 0.0;
    for n in 1..=SPECTRAL_MAX_N {
        for (seed, rank) in [(0, n), (1, n.div_ceil(2)), (2, 1)] {
            let a = random_psd(n, rank, seed * 31 + n as u64);
            spectral_linearize(&a).unwrap();
            worst_sp = worst_sp.max(spectral_gap(&a));
        }
    }
    ctx.report(
        "8c",
        "spectral linearization round trip, exhaustive N<=10",
        worst_sp <= SPECTRAL_TOL,
        format!("worst |penalty - q^T A q / 2| {worst_sp:e} (tol {SPECTRAL_TOL:e})"),
    );

    // update rule on every recorded trajectory
    let mut steps = 0;
    let mut error = None;
    for (spec, r) in &ctx.solved {
        let inst = spec.experiment.instantiate(r.seeds.instance).unwrap();
        match check_update_algebra(&inst.problem, &r.result, spec.solver.regularize) {
            Ok(n) => steps += n,
            Err(e) => {
                error = Some(format!("{} replica {}: {e}", r.experiment, r.replica));
                break;
            }
        }
    }
    let took = t0.elapsed();
    let trajectories = ctx.solved.len();
    ctx.report(
        "8d",
        "update rule reproduced bit for bit on recorded trajectories",
        error.is_none(),
        error.unwrap_or(format!("{steps} steps over {trajectories} trajectories exact")),
    );
    ctx.report(
        "8",
        "property suites time budget",
        took < PROP_TIME_LIMIT,
        format!(
            "{:.1}s (limit {}s; experiments before took {:.1}s)",
            took.as_secs_f64(),
            PROP_TIME_LIMIT.as_secs(),
            elapsed_before.as_secs_f64()
        ),
    );
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are accepted but ignored
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut ctx = Ctx {
        jobs,
        out: tempfile::tempdir().unwrap(),
        solved: Vec::new(),
        failures: 0,
    };
    let t0 = Instant::now();
    kmin(&mut ctx);
    number_partition(&mut ctx);
    linear_inference(&mut ctx);
    structured_cs(&mut ctx);
    traffic(&mut ctx);
    double_constraint(&mut ctx);
    iteration_histogram(&mut ctx);
    let before = t0.elapsed();
    property_suites(&mut ctx, before);
    println!(
        "acceptance: {} failing, total {:.1}s",
        ctx.failures,
        t0.elapsed().as_secs_f64()
    );
    if ctx.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
