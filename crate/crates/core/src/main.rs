use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lagrange_anneal::harness::{self, presets, HarnessError, RunSpec, ANNEALER_ENV};
use lagrange_anneal::samplers::MockAnnealerServer;

#[derive(Parser)]
#[command(version, about = "Lagrange-multiplier QUBO experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every replica and write trajectories and results.
    Run(SpecArgs),
    /// Bin iterations-to-optimum over replicas.
    Histogram(SpecArgs),
    /// Compare the four traffic methods on each replica instance.
    CompareTraffic(SpecArgs),
    /// Serve the mock annealer until interrupted.
    ServeMock {
        /// Listen address; defaults to $LAGRANGE_ANNEALER_ADDR or 127.0.0.1:8765.
        #[arg(long)]
        addr: Option<String>,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// RunSpec JSON file.
    config: Option<PathBuf>,
    /// Named parameter set, used when no config file is given.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Root directory for run directories.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SpecArgs {
    fn spec(&self) -> Result<RunSpec, HarnessError> {
        let mut spec = match (&self.config, &self.preset) {
            (Some(path), _) => RunSpec::load(path)?,
            (None, Some(name)) => presets::by_name(name).ok_or_else(|| {
                HarnessError::InvalidSpec(format!("unknown preset {name:?}; known: {}", presets::NAMES.join(", ")))
            })?,
            (None, None) => return Err(HarnessError::InvalidSpec("give a config file or --preset".into())),
        };
        if let Some(s) = self.seed {
            spec = spec.with_seed(s);
        }
        if let Some(r) = self.replicas {
            spec = spec.with_replicas(r);
        }
        if let Some(o) = &self.out {
            spec = spec.with_output_dir(o);
        }
        Ok(spec)
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, HarnessError> {
    match cmd {
        Command::Run(a) => {
            let out = harness::run(&a.spec()?, a.jobs)?;
            let ok = out.reports.iter().filter(|r| r.converged()).count();
            println!("{}: {ok}/{} replicas converged", out.dir.display(), out.reports.len());
            Ok(status(out.all_converged()))
        }
        Command::Histogram(a) => {
            let h = harness::histogram(&a.spec()?, a.jobs)?;
            let median = h.histogram.median().map_or("none".to_string(), |m| m.to_string());
            println!(
                "{}: median {median} iterations, {} of {} never reached the optimum",
                h.path.display(),
                h.histogram.overflow,
                h.histogram.replicas
            );
            Ok(status(h.run.all_converged()))
        }
        Command::CompareTraffic(a) => {
            let c = harness::compare_traffic(&a.spec()?, a.jobs)?;
            println!("{}", c.dir.join("comparison.json").display());
            for (m, cost) in &c.mean_cost {
                match cost {
                    Some(v) => println!("  {m:<14} mean cost {v}"),
                    None => println!("  {m:<14} absent"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ServeMock { addr } => {
            let addr = addr
                .or_else(|| std::env::var(ANNEALER_ENV).ok())
                .unwrap_or_else(|| "127.0.0.1:8765".into());
            let addr = addr.trim_start_matches("http://").to_string();
            let server = MockAnnealerServer::start(&addr).map_err(|source| HarnessError::Io {
                path: PathBuf::from(&addr),
                source,
            })?;
            println!("mock annealer listening on {}", server.endpoint());
            server.wait();
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn status(all_converged: bool) -> ExitCode {
    if all_converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
