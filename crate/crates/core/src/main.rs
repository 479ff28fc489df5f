use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aoicache::config::{self, ConfigError, Flat};
use aoicache::engine::{compute_metrics, cr_bound, read_runlog, RunLog};
use aoicache::experiment::{self, load_workload, ExperimentError};
use aoicache::par::{self, Exec};
use aoicache::workload::{write_catalog, write_trace};

/// AoI-aware edge caching simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic catalog and request trace.
    GenWorkload(Common),
    /// Run the configured strategy.
    Run(Common),
    /// Run every strategy in `compare.strategies` on one shared workload.
    Compare(Common),
    /// Run the compared strategies at every value of `sweep.axis`.
    Sweep(Common),
    /// Read and normalize a recorded catalog and trace.
    Ingest(Common),
    /// Print the competitive-ratio bound of a recorded run.
    Bound {
        /// Run record written by `run`.
        runlog: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Threads for independent runs and generation (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// Overrides such as `--economics.lambda=2` or `--lambda=2`.
    #[arg(allow_hyphen_values = true, value_name = "--KEY=VALUE")]
    overrides: Vec<String>,
}

fn flag_error(flag: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field { key: flag.to_string(), msg: msg.into() }
}

impl Common {
    /// The override list accepts hyphenated values, so clap hands it every
    /// flag that follows the first override. Those are recovered here.
    fn reclaim_flags(&mut self) -> Result<(), ConfigError> {
        let mut rest = Vec::with_capacity(self.overrides.len());
        let mut it = std::mem::take(&mut self.overrides).into_iter();
        while let Some(arg) = it.next() {
            let (flag, inline) = match arg.split_once('=') {
                Some((f, v)) => (f.to_string(), Some(v.to_string())),
                None => (arg.clone(), None),
            };
            match flag.as_str() {
                "--sequential" if inline.is_none() => self.sequential = true,
                "--jobs" | "-c" | "--config" => {
                    let value = inline.or_else(|| it.next()).ok_or_else(|| flag_error(&flag, "needs a value"))?;
                    if flag == "--jobs" {
                        let n = value.parse().map_err(|_| flag_error(&flag, format!("`{value}` is not a count")))?;
                        self.jobs = Some(n);
                    } else {
                        self.config = Some(PathBuf::from(value));
                    }
                }
                _ => rest.push(arg),
            }
        }
        self.overrides = rest;
        Ok(())
    }

    fn flat(&mut self) -> Result<Flat, ConfigError> {
        self.reclaim_flags()?;
        let overrides = self.overrides.iter().map(|o| config::parse_override(o)).collect::<Result<Vec<_>, _>>()?;
        let flat = config::load(self.config.as_deref(), &overrides)?;
        println!("# effective config");
        print!("{flat}");
        Ok(flat)
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }
}

fn summarize(param: &str, log: &RunLog) {
    let m = compute_metrics(log);
    let aoi = m.avg_aoi.map_or("-".to_string(), |a| format!("{a:.3}"));
    println!(
        "{:<16} {:<8} utility={} hit_rate={:.4} avg_aoi={} occupancy={:.4}{}",
        log.meta.strategy,
        param,
        m.total_utility,
        m.hit_rate,
        aoi,
        m.mean_occupancy,
        if m.no_requests { " (no requests)" } else { "" }
    );
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn dispatch(cmd: Command) -> Result<(), ExperimentError> {
    match cmd {
        Command::GenWorkload(mut c) => {
            let flat = c.flat()?;
            let cfg = config::RunConfig::from_flat(&flat)?;
            par::with_jobs(c.jobs, || -> Result<(), ExperimentError> {
                let w = load_workload(&cfg.workload, c.exec())?;
                write_outputs(&cfg.output_dir, &w)
            })
        }
        Command::Ingest(mut c) => {
            let mut flat = c.flat()?;
            if flat.get("workload.source") != "ingested" {
                flat.set("workload.source", "ingested")?;
            }
            let cfg = config::RunConfig::from_flat(&flat)?;
            let w = load_workload(&cfg.workload, c.exec())?;
            let requests: u64 = w.catalog.indices().map(|i| w.trace.total(i)).sum();
            println!("contents={} requests={} checksum={}", w.catalog.len(), requests, w.trace.checksum());
            write_outputs(&cfg.output_dir, &w)
        }
        Command::Run(mut c) => {
            let flat = c.flat()?;
            let (log, paths) = par::with_jobs(c.jobs, || experiment::cmd_run(&flat, c.exec()))?;
            summarize("default", &log);
            if log.meta.fallback_events > 0 {
                println!("predictor fallback events: {}", log.meta.fallback_events);
            }
            print_paths(&paths);
            Ok(())
        }
        Command::Compare(mut c) => {
            let flat = c.flat()?;
            let (logs, paths) = par::with_jobs(c.jobs, || experiment::cmd_compare(&flat, c.exec()))?;
            logs.iter().for_each(|l| summarize("default", l));
            print_paths(&paths);
            Ok(())
        }
        Command::Sweep(mut c) => {
            let flat = c.flat()?;
            let (logs, paths) = par::with_jobs(c.jobs, || experiment::cmd_sweep(&flat, c.exec()))?;
            let points = config::RunConfig::sweep_points(&flat)?;
            let per_point = logs.len() / points.len().max(1);
            for (i, l) in logs.iter().enumerate() {
                summarize(&points[i / per_point.max(1)].0, l);
            }
            print_paths(&paths);
            Ok(())
        }
        Command::Bound { runlog } => {
            let log = read_runlog(&runlog)?;
            match cr_bound(&log) {
                Some(rep) => println!("{rep}"),
                None => println!("bound=undefined (no cached content-period)"),
            }
            Ok(())
        }
    }
}

fn write_outputs(dir: &std::path::Path, w: &aoicache::workload::Workload) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.display().to_string(), source })?;
    let (catalog, trace) = (dir.join("catalog.csv"), dir.join("trace.csv"));
    write_catalog(&catalog, &w.catalog)?;
    write_trace(&trace, w)?;
    print_paths(&[catalog, trace]);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
