//! CSV reports and the run-record file.
//!
//! Report columns: `strategy;param;period;utility;hit_rate;avg_aoi;occupancy`.
//! Summary rows use `all` as the period. Floats are printed with six decimals
//! so that re-emitting a report is byte-identical.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dt::UpdateSchedule;
use crate::model::{ContentId, ContentIdx, EconomicParams, SimClock};
use crate::money::Money;
use crate::workload::io::{open_reader, open_writer};
use crate::workload::WorkloadError;

use super::{compute_metrics, ContentPeriodRow, EngineConfig, RunLog, RunMeta};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    File(#[from] WorkloadError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}

const REPORT_HEADER: &str = "strategy;param;period;utility;hit_rate;avg_aoi;occupancy";
const RUNLOG_HEADER: &str = "period;content;id;size;price;purchase;prefix_len;fee;served;aoi_sum;utility";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub strategy: String,
    pub param: String,
    /// `None` for the whole-run summary.
    pub period: Option<u64>,
    pub utility: Money,
    pub hit_rate: f64,
    pub avg_aoi: Option<f64>,
    pub occupancy: f64,
}

impl ReportRow {
    fn line(&self) -> String {
        format!(
            "{};{};{};{};{:.6};{};{:.6}",
            self.strategy,
            self.param,
            self.period.map_or("all".to_string(), |p| p.to_string()),
            self.utility,
            self.hit_rate,
            self.avg_aoi.map_or(String::new(), |a| format!("{a:.6}")),
            self.occupancy
        )
    }
}

/// Per-period rows followed by nothing else, and summary rows, for each
/// `(param, log)` pair in order.
pub fn report_rows(runs: &[(String, &RunLog)]) -> (Vec<ReportRow>, Vec<ReportRow>) {
    let (mut periods, mut summary) = (Vec::new(), Vec::new());
    for (param, log) in runs {
        let m = compute_metrics(log);
        for p in &m.periods {
            periods.push(ReportRow {
                strategy: log.meta.strategy.clone(),
                param: param.clone(),
                period: Some(p.period),
                utility: p.utility,
                hit_rate: p.hit_rate,
                avg_aoi: p.avg_aoi,
                occupancy: p.occupancy,
            });
        }
        summary.push(ReportRow {
            strategy: log.meta.strategy.clone(),
            param: param.clone(),
            period: None,
            utility: m.total_utility,
            hit_rate: m.hit_rate,
            avg_aoi: m.avg_aoi,
            occupancy: m.mean_occupancy,
        });
    }
    (periods, summary)
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<(), ReportError> {
    let io = |source| ReportError::Io { path: path.display().to_string(), source };
    let mut out = open_writer(path)?;
    for l in lines {
        writeln!(out, "{l}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes `<stem>_periods.csv` and `<stem>.csv` (summary) under `dir`.
pub fn emit_report(dir: &Path, stem: &str, runs: &[(String, &RunLog)]) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.display().to_string(), source })?;
    let (periods, summary) = report_rows(runs);
    let per = dir.join(format!("{stem}_periods.csv"));
    let sum = dir.join(format!("{stem}.csv"));
    let header = || std::iter::once(REPORT_HEADER.to_string());
    write_lines(&per, header().chain(periods.iter().map(ReportRow::line)))?;
    write_lines(&sum, header().chain(summary.iter().map(ReportRow::line)))?;
    Ok(vec![sum, per])
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Writes the full run record: `#key=value` metadata, then one row per
/// cached content-period.
pub fn write_runlog(path: &Path, log: &RunLog) -> Result<(), ReportError> {
    let c = &log.config;
    let meta = [
        ("strategy", log.meta.strategy.clone()),
        ("b", c.clock.b().to_string()),
        ("periods", c.clock.periods().to_string()),
        ("lambda", c.params.lambda.to_string()),
        ("c_d", c.params.c_d.to_string()),
        ("c_a", c.params.c_a.to_string()),
        ("phi", c.params.phi.to_string()),
        ("s_max", c.params.s_max.to_string()),
        ("dt_interval", c.schedule.interval().to_string()),
        ("fallback_events", log.meta.fallback_events.to_string()),
        ("trace_checksum", log.meta.trace_checksum.clone()),
        ("total_utility", log.total_utility.to_string()),
        ("period_requests", join(&log.period_requests)),
        ("occupancy", join(&log.occupancy)),
    ];
    let rows = log.rows.iter().map(|r| {
        format!(
            "{};{};{};{};{};{};{};{};{};{};{}",
            r.period, r.content.0, r.id, r.size, r.price, r.purchase as u8, r.prefix_len, r.fee, r.served, r.aoi_sum, r.utility
        )
    });
    write_lines(
        path,
        meta.iter()
            .map(|(k, v)| format!("#{k}={v}"))
            .chain(std::iter::once(RUNLOG_HEADER.to_string()))
            .chain(rows),
    )
}

/// Reads a file written by [`write_runlog`].
pub fn read_runlog(path: &Path) -> Result<RunLog, ReportError> {
    let shown = path.display().to_string();
    let perr = |line: usize, msg: String| ReportError::Parse { path: shown.clone(), line, msg };
    let mut meta = BTreeMap::new();
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, line) in BufReader::new(open_reader(path)?).lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|source| ReportError::Io { path: shown.clone(), source })?;
        if let Some(kv) = line.strip_prefix('#') {
            let (k, v) = kv.split_once('=').ok_or_else(|| perr(n, format!("bad metadata `{line}`")))?;
            meta.insert(k.to_string(), v.to_string());
            continue;
        }
        if !header_seen {
            if line != RUNLOG_HEADER {
                return Err(perr(n, format!("expected header `{RUNLOG_HEADER}`")));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(';').collect();
        if f.len() != 11 {
            return Err(perr(n, format!("expected 11 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|e| perr(n, format!("`{s}`: {e}")));
        let money = |s: &str| s.parse::<Money>().map_err(|e| perr(n, e.to_string()));
        rows.push(ContentPeriodRow {
            period: num(f[0])?,
            content: ContentIdx(num(f[1])? as u32),
            id: ContentId(num(f[2])?),
            size: num(f[3])?,
            price: money(f[4])?,
            purchase: num(f[5])? == 1,
            prefix_len: num(f[6])? as u32,
            fee: money(f[7])?,
            served: num(f[8])?,
            aoi_sum: num(f[9])?,
            utility: money(f[10])?,
        });
    }
    let get = |k: &str| meta.get(k).cloned().ok_or_else(|| perr(0, format!("missing metadata `{k}`")));
    let num = |k: &str| get(k)?.parse::<u64>().map_err(|e| perr(0, format!("{k}: {e}")));
    let money = |k: &str| get(k)?.parse::<Money>().map_err(|e| perr(0, format!("{k}: {e}")));
    let list = |k: &str| -> Result<Vec<u64>, ReportError> {
        let v = get(k)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',').map(|x| x.parse().map_err(|e| perr(0, format!("{k}: {e}")))).collect()
    };
    let clock = SimClock::new(num("b")?, num("periods")?).map_err(|e| perr(0, e.to_string()))?;
    let params = EconomicParams {
        lambda: money("lambda")?,
        c_d: money("c_d")?,
        c_a: money("c_a")?,
        phi: num("phi")?,
        s_max: num("s_max")?,
    };
    let schedule = UpdateSchedule::new(num("dt_interval")?).map_err(|e| perr(0, e.to_string()))?;
    Ok(RunLog {
        meta: RunMeta {
            strategy: get("strategy")?,
            fallback_events: num("fallback_events")?,
            trace_checksum: get("trace_checksum")?,
        },
        config: EngineConfig { clock, params, schedule },
        rows,
        period_requests: list("period_requests")?,
        occupancy: list("occupancy")?,
        total_utility: money("total_utility")?,
    })
}
