use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use super::{io_err, nu_norm, HarnessError, Instance, ReplicaReport, RunSpec};
use crate::fsio::write_atomic;
use crate::problems::write_instance;

/// At most this many `nu_k` columns are written per trajectory.
pub const TRAJECTORY_NU_COLUMNS: usize = 16;

const FIXED_COLUMNS: [&str; 7] = [
    "step",
    "eta",
    "residual_norm",
    "mean_penalty_energy",
    "min_penalty_energy",
    "mse",
    "nu_norm",
];

pub(crate) fn trajectory_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend((0..k.min(TRAJECTORY_NU_COLUMNS)).map(|i| format!("nu_{i}")));
    h
}

pub(crate) fn replica_dir(run: &Path, r: usize) -> PathBuf {
    run.join(format!("replica-{r:03}"))
}

/// Creates `<root>/<prefix>-NNNN` with the first unused number. Existing
/// directories are never reused.
pub(crate) fn create_run_dir(root: &Path, prefix: &str) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    for i in 1..10_000 {
        let dir = root.join(format!("{prefix}-{i:04}"));
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_err(&dir)(e)),
        }
    }
    Err(HarnessError::InvalidSpec(format!("{} has no free run slots", root.display())))
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<(), HarnessError> {
    write_atomic(path, &json_bytes(v)).map_err(io_err(path))
}

pub(crate) fn write_spec(dir: &Path, spec: &RunSpec) -> Result<(), HarnessError> {
    write_json(&dir.join("spec.json"), spec)
}

fn csv_bytes(rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub(crate) fn write_csv(path: &Path, rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), HarnessError> {
    write_atomic(path, &csv_bytes(rows)).map_err(io_err(path))
}

pub(crate) fn trajectory_rows(report: &ReplicaReport, step_mse: &[Option<f64>]) -> Vec<Vec<String>> {
    let k = report.result.final_nu.len();
    let mut rows = vec![trajectory_header(k)];
    for (t, rec) in report.result.trajectory.iter().enumerate() {
        let mut row = vec![
            rec.iteration.to_string(),
            rec.eta.to_string(),
            rec.residual_norm.to_string(),
            rec.mean_penalty_energy.to_string(),
            rec.min_penalty_energy.to_string(),
            step_mse.get(t).copied().flatten().map(|m| m.to_string()).unwrap_or_default(),
            nu_norm(&rec.nu).to_string(),
        ];
        row.extend(rec.nu.iter().take(TRAJECTORY_NU_COLUMNS).map(f64::to_string));
        rows.push(row);
    }
    rows
}

pub(crate) fn write_replica(
    run: &Path,
    inst: &Instance,
    report: &ReplicaReport,
    step_mse: &[Option<f64>],
) -> Result<(), HarnessError> {
    let dir = replica_dir(run, report.replica);
    fs::create_dir(&dir).map_err(io_err(&dir))?;
    if let Some(prov) = &inst.provenance {
        write_instance(&dir, "instance", &inst.problem, prov)?;
    }
    write_csv(&dir.join("trajectory.csv"), trajectory_rows(report, step_mse))?;
    write_json(&dir.join("result.json"), report)
}

fn invalid(path: &Path, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Validation(format!("{}: {msg}", path.display()))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| invalid(path, e))
}

pub(crate) fn read_csv(path: &Path) -> Result<Vec<csv::StringRecord>, HarnessError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| invalid(path, e))?;
    r.records().collect::<Result<_, _>>().map_err(|e| invalid(path, e))
}

fn check_trajectory(path: &Path, report: &ReplicaReport) -> Result<(), HarnessError> {
    let rows = read_csv(path)?;
    let header = trajectory_header(report.result.final_nu.len());
    let Some((head, body)) = rows.split_first() else {
        return Err(invalid(path, "empty file"));
    };
    if head.iter().ne(header.iter().map(String::as_str)) {
        return Err(invalid(path, "unexpected header"));
    }
    if body.len() != report.result.trajectory.len() {
        return Err(invalid(path, format!("{} rows for {} iterations", body.len(), report.result.trajectory.len())));
    }
    for (t, row) in body.iter().enumerate() {
        for (col, cell) in header.iter().zip(row.iter()) {
            let empty_ok = col == "mse" && report.mse.is_none();
            if !(empty_ok && cell.is_empty()) && cell.parse::<f64>().is_err() {
                return Err(invalid(path, format!("row {t} column {col}: {cell:?} is not a number")));
            }
        }
        if row.get(0) != Some(t.to_string().as_str()) {
            return Err(invalid(path, format!("row {t} has the wrong step")));
        }
    }
    Ok(())
}

/// Re-reads every artifact of a run directory and checks it against the
/// documented layout.
pub(crate) fn validate_run(dir: &Path, spec: &RunSpec) -> Result<Vec<ReplicaReport>, HarnessError> {
    let spec_path = dir.join("spec.json");
    let stored: RunSpec = read_json(&spec_path)?;
    if &stored != spec {
        return Err(invalid(&spec_path, "does not match the resolved spec"));
    }
    let seeds = spec.seeds();
    let mut reports = Vec::with_capacity(spec.replicas);
    for r in 0..spec.replicas {
        let rd = replica_dir(dir, r);
        let path = rd.join("result.json");
        let report: ReplicaReport = read_json(&path)?;
        if report.replica != r || report.seeds != seeds[r] {
            return Err(invalid(&path, "replica index or seeds disagree with spec.json"));
        }
        if report.result.trajectory.len() != report.result.iterations_used {
            return Err(invalid(&path, "iterations_used disagrees with the trajectory"));
        }
        check_trajectory(&rd.join("trajectory.csv"), &report)?;
        reports.push(report);
    }
    Ok(reports)
}
