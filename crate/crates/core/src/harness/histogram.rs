use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::output::{read_csv, write_csv};
use super::{run, HarnessError, RunOutcome, RunSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub iterations: usize,
    pub count: usize,
    pub ratio: f64,
}

/// Iterations-to-optimum over replicas, in unit-width bins from 1 to the
/// largest observed count. Replicas that never reached the optimum land in
/// `overflow`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub rows: Vec<HistogramRow>,
    pub overflow: usize,
    pub replicas: usize,
}

impl Histogram {
    pub fn from_hits(hits: &[Option<usize>]) -> Self {
        let replicas = hits.len();
        let max = hits.iter().flatten().copied().max().unwrap_or(0);
        let mut counts = vec![0usize; max + 1];
        for h in hits.iter().flatten() {
            counts[*h] += 1;
        }
        let rows = (1..=max)
            .map(|i| HistogramRow {
                iterations: i,
                count: counts[i],
                ratio: counts[i] as f64 / replicas as f64,
            })
            .collect();
        Histogram {
            rows,
            overflow: hits.iter().filter(|h| h.is_none()).count(),
            replicas,
        }
    }

    /// Median iterations, counting overflow replicas as infinitely slow.
    /// `None` when at least half the replicas overflowed.
    pub fn median(&self) -> Option<f64> {
        let mut v: Vec<f64> = self
            .rows
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.iterations as f64, r.count))
            .collect();
        v.extend(std::iter::repeat_n(f64::INFINITY, self.overflow));
        let n = v.len();
        if n == 0 {
            return None;
        }
        let m = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        m.is_finite().then_some(m)
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![vec!["iterations".into(), "count".into(), "ratio".into()]];
        for r in &self.rows {
            rows.push(vec![r.iterations.to_string(), r.count.to_string(), r.ratio.to_string()]);
        }
        rows.push(vec![
            "overflow".into(),
            self.overflow.to_string(),
            (self.overflow as f64 / self.replicas as f64).to_string(),
        ]);
        rows
    }

    fn check_file(&self, path: &Path) -> Result<(), HarnessError> {
        let bad = |m: &str| HarnessError::Validation(format!("{}: {m}", path.display()));
        let rows = read_csv(path)?;
        if rows.len() != self.rows.len() + 2 || rows[0].iter().ne(["iterations", "count", "ratio"]) {
            return Err(bad("unexpected shape"));
        }
        let mut total = 0;
        for (i, row) in rows[1..].iter().enumerate() {
            let last = i == self.rows.len();
            let label_ok = if last {
                &row[0] == "overflow"
            } else {
                row[0].parse::<usize>().ok() == Some(i + 1)
            };
            let count: usize = row[1].parse().map_err(|_| bad("count is not an integer"))?;
            row[2].parse::<f64>().map_err(|_| bad("ratio is not a number"))?;
            if !label_ok {
                return Err(bad("bins are not consecutive"));
            }
            total += count;
        }
        if total != self.replicas {
            return Err(bad("counts do not sum to the replica count"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HistogramOutcome {
    pub run: RunOutcome,
    pub histogram: Histogram,
    pub path: PathBuf,
}

/// Runs `spec` and bins iterations-to-optimum into `histogram.csv` inside
/// the run directory. Needs at least two replicas with distinct seeds and an
/// experiment with a known optimum.
pub fn histogram(spec: &RunSpec, jobs: usize) -> Result<HistogramOutcome, HarnessError> {
    if !spec.experiment.has_known_optimum() {
        return Err(HarnessError::InvalidSpec(format!(
            "{} has no known optimum to count iterations against",
            spec.experiment.name()
        )));
    }
    if spec.replicas < 2 {
        return Err(HarnessError::InvalidSpec("histogram needs at least 2 replicas".into()));
    }
    spec.require_distinct_seeds()?;
    let outcome = run(spec, jobs)?;
    let hits: Vec<Option<usize>> = outcome.reports.iter().map(|r| r.iterations_to_optimum).collect();
    let h = Histogram::from_hits(&hits);
    let path = outcome.dir.join("histogram.csv");
    write_csv(&path, h.csv_rows())?;
    h.check_file(&path)?;
    Ok(HistogramOutcome {
        run: outcome,
        histogram: h,
        path,
    })
}
