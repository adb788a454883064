use std::fs;
use std::path::Path;

use lagrange_anneal::harness::{
    compare_traffic, histogram, presets, run, Experiment, HarnessError, ReplicaSeeds, RunSpec, SamplerSpec,
    TRAFFIC_METHODS,
};
use lagrange_anneal::model::BinaryVector;
use lagrange_anneal::problems::{gen_kmin, kmin_fields, kmin_oracle, TrafficInstance};
use lagrange_anneal::samplers::SamplerConfig;
use tempfile::TempDir;

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn last_row(csv: &str) -> Vec<String> {
    csv.lines().last().unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn kmin_run_reaches_the_sorted_optimum() {
    let tmp = TempDir::new().unwrap();
    let spec = presets::kmin(100, 5).with_seed(11).with_output_dir(tmp.path());
    let out = run(&spec, 1).unwrap();
    assert!(out.all_converged());
    let report = &out.reports[0];
    let fields = kmin_fields(&gen_kmin(100, 5, report.seeds.instance).unwrap());
    let want = kmin_oracle(&fields, 5);
    assert!((report.result.incumbent_energy - want).abs() < 1e-9);

    let csv = read(&out.dir.join("replica-000/trajectory.csv"));
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row = last_row(&csv);
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    assert_eq!(row[col("residual_norm")].parse::<f64>().unwrap(), 0.0);
    assert!((row[col("min_penalty_energy")].parse::<f64>().unwrap() - want).abs() < 1e-9);
    for f in ["instance.json", "result.json"] {
        assert!(out.dir.join("replica-000").join(f).is_file(), "{f}");
    }
}

#[test]
fn equal_replica_seeds_give_identical_trajectories() {
    let tmp = TempDir::new().unwrap();
    let mut spec = presets::number_partition(20, 50).with_output_dir(tmp.path()).with_replicas(3);
    spec.replica_seeds = Some(vec![ReplicaSeeds { instance: 4, solver: 9 }; 3]);
    let out = run(&spec, 2).unwrap();
    let first = read(&out.dir.join("replica-000/trajectory.csv"));
    for r in 1..3 {
        assert_eq!(read(&out.dir.join(format!("replica-{r:03}/trajectory.csv"))), first);
    }
}

#[test]
fn saved_spec_reproduces_the_run_bit_for_bit() {
    let tmp = TempDir::new().unwrap();
    let spec = presets::structured_cs(Default::default())
        .with_seed(5)
        .with_replicas(2)
        .with_output_dir(tmp.path());
    let a = run(&spec, 2).unwrap();
    let reloaded = RunSpec::load(&a.dir.join("spec.json")).unwrap();
    let b = run(&reloaded, 1).unwrap();
    assert_ne!(a.dir, b.dir);
    for r in 0..2 {
        let name = format!("replica-{r:03}/trajectory.csv");
        assert_eq!(read(&a.dir.join(&name)), read(&b.dir.join(&name)), "{name}");
    }
}

#[test]
fn config_errors_write_nothing() {
    let tmp = TempDir::new().unwrap();
    let text = presets::kmin(10, 2)
        .with_output_dir(tmp.path())
        .to_json()
        .replace("\"kmin\"", "\"mystery\"");
    assert!(matches!(RunSpec::from_json(&text), Err(HarnessError::InvalidSpec(_))));

    let bad = presets::kmin(10, 20).with_output_dir(tmp.path());
    assert!(run(&bad, 1).is_err());
    let zero = presets::kmin(10, 2).with_output_dir(tmp.path()).with_replicas(0);
    assert!(matches!(run(&zero, 1), Err(HarnessError::InvalidSpec(_))));
    let mut sampler = presets::kmin(10, 2).with_output_dir(tmp.path());
    sampler.sampler = SamplerSpec::Gibbs {
        config: SamplerConfig::fixed_beta(1.0, 1, 0),
    };
    assert!(run(&sampler, 1).is_err());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let file = tmp.path().join("not-a-dir");
    fs::write(&file, "x").unwrap();
    let spec = presets::kmin(10, 2).with_output_dir(file.join("runs"));
    assert!(matches!(run(&spec, 1), Err(HarnessError::Io { .. })));
}

#[test]
fn histogram_of_small_partitions_has_no_overflow() {
    let tmp = TempDir::new().unwrap();
    let spec = presets::number_partition(20, 100)
        .with_replicas(100)
        .with_seed(1)
        .with_output_dir(tmp.path());
    let out = histogram(&spec, 1).unwrap();
    assert_eq!(out.histogram.overflow, 0);
    let total: usize = out.histogram.rows.iter().map(|r| r.count).sum();
    assert_eq!(total, 100);
    let ratios: f64 = out.histogram.rows.iter().map(|r| r.ratio).sum();
    assert!((ratios - 1.0).abs() < 1e-12);
    assert!(read(&out.path).lines().last().unwrap().starts_with("overflow,0"));
}

#[test]
fn histogram_of_linear_inference_has_a_finite_median() {
    let tmp = TempDir::new().unwrap();
    let spec = presets::linear_system(100, 80)
        .with_replicas(50)
        .with_seed(3)
        .with_output_dir(tmp.path());
    let out = histogram(&spec, 1).unwrap();
    let median = out.histogram.median().expect("median within the iteration cap");
    assert!((1.0..=200.0).contains(&median), "median {median}");
}

#[test]
fn histogram_rejects_unusable_specs() {
    let tmp = TempDir::new().unwrap();
    let mut dup = presets::number_partition(20, 10).with_replicas(3).with_output_dir(tmp.path());
    dup.replica_seeds = Some(vec![ReplicaSeeds { instance: 1, solver: 1 }; 3]);
    assert!(matches!(histogram(&dup, 1), Err(HarnessError::InvalidSpec(_))));

    let cs = presets::structured_cs(Default::default())
        .with_replicas(3)
        .with_output_dir(tmp.path());
    assert!(matches!(histogram(&cs, 1), Err(HarnessError::InvalidSpec(_))));

    let single = presets::number_partition(20, 10).with_output_dir(tmp.path());
    assert!(matches!(histogram(&single, 1), Err(HarnessError::InvalidSpec(_))));
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

fn enumerated_optimum(t: &TrafficInstance) -> f64 {
    let total = t.n_routes.pow(t.n_cars as u32);
    (0..total)
        .map(|code| {
            let mut q = BinaryVector::zeros(t.n_vars());
            let mut c = code;
            for i in 0..t.n_cars {
                q.set(t.var(i, c % t.n_routes), true);
                c /= t.n_routes;
            }
            t.cost(&q)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn single_car_methods_agree() {
    let tmp = TempDir::new().unwrap();
    let spec = presets::traffic(4, 1).with_replicas(5).with_output_dir(tmp.path());
    let cmp = compare_traffic(&spec, 1).unwrap();
    for ic in &cmp.instances {
        let base = ic.cost("shortest_path").unwrap();
        for m in TRAFFIC_METHODS {
            assert_eq!(ic.cost(m), Some(base), "replica {} method {m}", ic.replica);
        }
    }
}

#[test]
fn two_car_sampling_methods_find_the_enumerated_optimum() {
    let tmp = TempDir::new().unwrap();
    let spec = presets::traffic(4, 2).with_replicas(10).with_seed(2).with_output_dir(tmp.path());
    let cmp = compare_traffic(&spec, 1).unwrap();
    for ic in &cmp.instances {
        let inst = spec.experiment.instantiate(ic.seeds.instance).unwrap();
        let best = enumerated_optimum(inst.traffic.as_ref().unwrap());
        for m in ["classical", "annealer"] {
            let c = ic.cost(m).unwrap();
            assert!((c - best).abs() < 1e-9, "replica {} {m}: {c} vs {best}", ic.replica);
        }
    }
}

#[test]
fn comparison_lists_all_four_methods() {
    let tmp = TempDir::new().unwrap();
    let spec = presets::traffic(8, 50).with_output_dir(tmp.path());
    let cmp = compare_traffic(&spec, 1).unwrap();
    let text = read(&cmp.dir.join("comparison.json"));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let methods = doc["instances"][0]["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 4);
    assert_eq!(cmp.mean_cost.len(), 4);
    assert!(cmp.mean_cost.values().all(Option::is_some));
}

#[test]
fn unreachable_annealer_leaves_its_column_absent() {
    let tmp = TempDir::new().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut spec = presets::traffic(4, 3).with_replicas(2).with_output_dir(tmp.path());
    spec.sampler = SamplerSpec::External {
        endpoint: Some(format!("127.0.0.1:{port}")),
        config: SamplerConfig::fixed_beta(2.0, 5, 20),
        onehot_penalty: Default::default(),
    };
    let cmp = compare_traffic(&spec, 1).unwrap();
    assert_eq!(cmp.mean_cost["annealer"], None);
    for ic in &cmp.instances {
        assert!(ic.cost("annealer").is_none());
        for m in ["shortest_path", "deterministic", "classical"] {
            assert!(ic.cost(m).is_some(), "{m}");
        }
    }
}

#[test]
fn compare_rejects_other_experiments() {
    let tmp = TempDir::new().unwrap();
    let spec = presets::kmin(10, 2).with_output_dir(tmp.path());
    assert!(matches!(compare_traffic(&spec, 1), Err(HarnessError::InvalidSpec(_))));
    let custom = RunSpec {
        experiment: Experiment::Custom {
            problem: tmp.path().join("missing.json"),
        },
        ..presets::kmin(10, 2).with_output_dir(tmp.path())
    };
    assert!(run(&custom, 1).is_err());
}
