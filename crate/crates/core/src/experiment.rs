//! Orchestration shared by the command line and the test suites: loading the
//! configured workload, running strategies on it, and writing the outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{build_strategy, ConfigError, Flat, RunConfig, WorkloadSource};
use crate::engine::{emit_report, run_simulation, write_runlog, EngineError, ReportError, RunLog};
use crate::par::{self, Exec};
use crate::predictor::PredictError;
use crate::workload::{generate, ingest_trace, IngestOptions, Workload, WorkloadError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("strategy `{strategy}`: {source}")]
    Predictor {
        strategy: String,
        #[source]
        source: PredictError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub fn load_workload(source: &WorkloadSource, exec: Exec) -> Result<Workload, WorkloadError> {
    match source {
        WorkloadSource::Generated(cfg) => generate(cfg, exec),
        WorkloadSource::Ingested { catalog, trace, min_total_requests } => {
            ingest_trace(catalog, trace, IngestOptions { min_total_requests: *min_total_requests })
        }
    }
}

/// Runs one named strategy under `cfg` on `w`.
pub fn run_named(name: &str, cfg: &RunConfig, w: &Workload) -> Result<RunLog, ExperimentError> {
    let end = cfg.engine.clock.total_slots();
    let mut strategy = build_strategy(name, &cfg.strategy, &w.trace, end)
        .map_err(|source| ExperimentError::Predictor { strategy: name.to_string(), source })?;
    Ok(run_simulation(w, &cfg.engine, strategy.as_mut())?)
}

/// One independent run of a sweep or comparison.
pub struct Job<'a> {
    pub param: String,
    pub strategy: String,
    pub config: &'a RunConfig,
    pub workload: &'a Workload,
}

/// Runs every job, in parallel under [`Exec::Parallel`]; logs keep job order.
pub fn run_jobs(jobs: &[Job<'_>], exec: Exec) -> Result<Vec<RunLog>, ExperimentError> {
    par::map(exec, jobs, |j| {
        log::info!("running {} ({})", j.strategy, j.param);
        run_named(&j.strategy, j.config, j.workload)
    })
    .into_iter()
    .collect()
}

/// Structured-text metadata written next to every output: effective config,
/// crate version, trace checksums and fallback counts. No timestamps, so the
/// file is reproducible.
pub fn metadata(command: &str, flat: &Flat, logs: &[(String, &RunLog)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {command}");
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "parallel_feature = {}", cfg!(feature = "parallel"));
    for (k, v) in flat.iter() {
        let _ = writeln!(s, "config.{k} = {v}");
    }
    for (param, log) in logs {
        let p = format!("run.{}.{}", param, log.meta.strategy);
        let _ = writeln!(s, "{p}.trace_checksum = {}", log.meta.trace_checksum);
        let _ = writeln!(s, "{p}.fallback_events = {}", log.meta.fallback_events);
        let _ = writeln!(s, "{p}.total_utility = {}", log.total_utility);
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, text).map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })
}

fn ensure_dir(dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.display().to_string(), source })
}

/// `run`: one strategy, report plus full run record.
pub fn cmd_run(flat: &Flat, exec: Exec) -> Result<(RunLog, Vec<PathBuf>), ExperimentError> {
    let cfg = RunConfig::from_flat(flat)?;
    let w = load_workload(&cfg.workload, exec)?;
    let log = run_named(&cfg.strategy.name, &cfg, &w)?;
    ensure_dir(&cfg.output_dir)?;
    let runs = [("default".to_string(), &log)];
    let mut paths = emit_report(&cfg.output_dir, "run", &runs)?;
    let runlog = cfg.output_dir.join("runlog.csv");
    write_runlog(&runlog, &log)?;
    let meta = cfg.output_dir.join("run_meta.txt");
    write_text(&meta, &metadata("run", flat, &runs))?;
    paths.extend([runlog, meta]);
    Ok((log, paths))
}

/// `compare`: every listed strategy on one shared workload.
pub fn cmd_compare(flat: &Flat, exec: Exec) -> Result<(Vec<RunLog>, Vec<PathBuf>), ExperimentError> {
    let cfg = RunConfig::from_flat(flat)?;
    let w = load_workload(&cfg.workload, exec)?;
    let jobs: Vec<Job> = cfg
        .compare
        .iter()
        .map(|s| Job { param: "default".into(), strategy: s.clone(), config: &cfg, workload: &w })
        .collect();
    let logs = run_jobs(&jobs, exec)?;
    ensure_dir(&cfg.output_dir)?;
    let runs: Vec<(String, &RunLog)> = logs.iter().map(|l| ("default".to_string(), l)).collect();
    let mut paths = emit_report(&cfg.output_dir, "compare", &runs)?;
    let meta = cfg.output_dir.join("compare_meta.txt");
    write_text(&meta, &metadata("compare", flat, &runs))?;
    paths.push(meta);
    Ok((logs, paths))
}

/// `sweep`: the compared strategies at every value of one axis.
pub fn cmd_sweep(flat: &Flat, exec: Exec) -> Result<(Vec<RunLog>, Vec<PathBuf>), ExperimentError> {
    let points = RunConfig::sweep_points(flat)?;
    let base = RunConfig::from_flat(flat)?;
    let label = base.sweep.as_ref().map(|s| s.label().to_string()).unwrap_or_default();
    // Points that share a workload definition share the generated instance.
    let mut workloads: Vec<(WorkloadSource, Workload)> = Vec::new();
    let mut which = Vec::with_capacity(points.len());
    for (_, cfg) in &points {
        match workloads.iter().position(|(s, _)| *s == cfg.workload) {
            Some(i) => which.push(i),
            None => {
                workloads.push((cfg.workload.clone(), load_workload(&cfg.workload, exec)?));
                which.push(workloads.len() - 1);
            }
        }
    }
    let mut jobs = Vec::new();
    for ((value, cfg), &wi) in points.iter().zip(&which) {
        for s in &cfg.compare {
            jobs.push(Job { param: value.clone(), strategy: s.clone(), config: cfg, workload: &workloads[wi].1 });
        }
    }
    let logs = run_jobs(&jobs, exec)?;
    ensure_dir(&base.output_dir)?;
    let runs: Vec<(String, &RunLog)> = jobs.iter().zip(&logs).map(|(j, l)| (j.param.clone(), l)).collect();
    let stem = format!("sweep_{label}");
    let mut paths = emit_report(&base.output_dir, &stem, &runs)?;
    let meta = base.output_dir.join(format!("{stem}_meta.txt"));
    write_text(&meta, &metadata("sweep", flat, &runs))?;
    paths.push(meta);
    Ok((logs, paths))
}
