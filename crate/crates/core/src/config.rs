//! Run configuration: a flat `key = value` file with dotted keys, layered
//! over a preset and then over `--key=value` overrides.
//!
//! Every key has a default in every preset, so the set of known keys is fixed
//! and anything else is rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::dt::UpdateSchedule;
use crate::engine::EngineConfig;
use crate::model::{EconomicParams, SimClock};
use crate::money::Money;
use crate::predictor::{PluginPredictor, Predictor, WindowAverage, WithFallback};
use crate::strategies::{DtOca, Fifo, Ftpl, GreedyOffline, OpLfu, Random, Strategy, WLfu};
use crate::workload::{PopularityKind, PopularityProfile, WorkloadConfig};

/// Strategy names accepted by `strategy.name` and `compare.strategies`.
pub const STRATEGIES: [&str; 8] = ["dtoca", "dtoca-pp", "oplfu", "wlfu", "fifo", "ftpl", "random", "greedy-offline"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{path}: {msg}")]
    File { path: String, msg: String },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` is ambiguous: {candidates}")]
    Ambiguous { key: String, candidates: String },
    #[error("override `{0}` must look like --key=value")]
    Override(String),
    #[error("{key}: {msg}")]
    Field { key: String, msg: String },
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Many(Vec<ConfigError>),
}

fn field(key: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError::Field { key: key.to_string(), msg: msg.to_string() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// A few hundred slots; for smoke tests.
    Tiny,
    /// Desk scale: 3,000 slots and 30,000 contents.
    Small,
    /// Full experimental scale: 30,000 slots and 300,000 contents.
    Paper,
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tiny" => Ok(Preset::Tiny),
            "small" => Ok(Preset::Small),
            "paper" => Ok(Preset::Paper),
            other => Err(format!("unknown preset `{other}` (tiny, small, paper)")),
        }
    }
}

/// Flat key/value view of a configuration, sorted by key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flat(BTreeMap<String, String>);

impl Flat {
    pub fn preset(preset: Preset) -> Flat {
        let (slots, contents, preset_name) = match preset {
            Preset::Tiny => (300, 3_000, "tiny"),
            Preset::Small => (3_000, 30_000, "small"),
            Preset::Paper => (30_000, 300_000, "paper"),
        };
        let pop = PopularityProfile::default();
        let kv: Vec<(&str, String)> = vec![
            ("preset", preset_name.into()),
            ("clock.b", "10".into()),
            ("clock.total_slots", slots.to_string()),
            ("economics.lambda", "1".into()),
            ("economics.c_d", "1".into()),
            ("economics.c_a", "0.1".into()),
            ("economics.phi", "30".into()),
            ("economics.s_max", "300".into()),
            ("economics.fee_ceiling", "30".into()),
            ("dt.interval", "1".into()),
            ("workload.source", "generated".into()),
            ("workload.seed", "1".into()),
            ("workload.total_contents", contents.to_string()),
            ("workload.size_min", "2".into()),
            ("workload.size_max", "50".into()),
            ("workload.price_min", "20".into()),
            ("workload.price_max", "200".into()),
            ("workload.popularity.kind", pop.kind.as_str().into()),
            ("workload.popularity.peak_scale", pop.peak_scale.to_string()),
            ("workload.popularity.peak_shape", pop.peak_shape.to_string()),
            ("workload.popularity.peak_cap", pop.peak_cap.to_string()),
            ("workload.popularity.rise_slot", pop.rise_slot.to_string()),
            ("workload.popularity.constant_rate", pop.constant_rate.to_string()),
            ("workload.popularity.tail_cutoff", pop.tail_cutoff.to_string()),
            ("workload.catalog_file", String::new()),
            ("workload.trace_file", String::new()),
            ("workload.min_total_requests", "0".into()),
            ("strategy.name", "dtoca".into()),
            ("strategy.predictor", "window".into()),
            ("strategy.predictor_window", String::new()),
            ("strategy.window", String::new()),
            ("strategy.eta", "10".into()),
            ("strategy.seed", "1".into()),
            ("strategy.plugin_command", String::new()),
            ("strategy.plugin_timeout_ms", "5000".into()),
            ("compare.strategies", "dtoca,dtoca-pp,oplfu,wlfu,fifo,ftpl,random".into()),
            ("sweep.axis", String::new()),
            ("sweep.values", String::new()),
            ("output.dir", "out".into()),
        ];
        Flat(kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn get(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    /// Resolves a full key or an unambiguous last segment (`lambda`).
    pub fn resolve(&self, key: &str) -> Result<String, ConfigError> {
        if self.0.contains_key(key) {
            return Ok(key.to_string());
        }
        let matches: Vec<&String> = self.0.keys().filter(|k| k.rsplit('.').next() == Some(key)).collect();
        match matches.as_slice() {
            [one] => Ok((*one).clone()),
            [] => Err(ConfigError::UnknownKey(key.to_string())),
            many => Err(ConfigError::Ambiguous {
                key: key.to_string(),
                candidates: many.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "),
            }),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let k = self.resolve(key)?;
        self.0.insert(k, value.trim().to_string());
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl fmt::Display for Flat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.0 {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str, path: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { path: path.to_string(), line: i + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { path: path.to_string(), line: i + 1 });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_override(arg: &str) -> Result<(String, String), ConfigError> {
    let body = arg.strip_prefix("--").ok_or_else(|| ConfigError::Override(arg.to_string()))?;
    let (k, v) = body.split_once('=').ok_or_else(|| ConfigError::Override(arg.to_string()))?;
    if k.is_empty() {
        return Err(ConfigError::Override(arg.to_string()));
    }
    Ok((k.to_string(), v.to_string()))
}

/// Layers preset, file and overrides. The preset named last wins and is
/// applied first.
pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Flat, ConfigError> {
    let pairs = match file {
        Some(p) => {
            let shown = p.display().to_string();
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError::File { path: shown.clone(), msg: e.to_string() })?;
            parse_pairs(&text, &shown)?
        }
        None => Vec::new(),
    };
    let all: Vec<&(String, String)> = pairs.iter().chain(overrides).collect();
    let preset = match all.iter().rev().find(|(k, _)| k == "preset") {
        Some((_, v)) => v.parse::<Preset>().map_err(|m| field("preset", m))?,
        None => Preset::Small,
    };
    let mut flat = Flat::preset(preset);
    for (k, v) in all {
        flat.set(k, v)?;
    }
    Ok(flat)
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkloadSource {
    Generated(WorkloadConfig),
    Ingested { catalog: PathBuf, trace: PathBuf, min_total_requests: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    Window,
    Plugin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategySpec {
    pub name: String,
    pub predictor: PredictorKind,
    pub predictor_window: u64,
    /// W-LFU window.
    pub window: u64,
    pub eta: f64,
    pub seed: u64,
    pub plugin_command: String,
    pub plugin_timeout: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    /// Full key of the swept parameter.
    pub axis: String,
    pub values: Vec<String>,
}

impl SweepSpec {
    /// Short axis name used in file names.
    pub fn label(&self) -> &str {
        self.axis.rsplit('.').next().unwrap_or(&self.axis)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub workload: WorkloadSource,
    pub strategy: StrategySpec,
    pub compare: Vec<String>,
    pub sweep: Option<SweepSpec>,
    pub output_dir: PathBuf,
}

struct Reader<'a> {
    flat: &'a Flat,
    errors: Vec<ConfigError>,
}

impl Reader<'_> {
    fn parse<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        match self.flat.get(key).parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(field(key, format!("`{}`: {e}", self.flat.get(key))));
                None
            }
        }
    }

    fn positive(&mut self, key: &str) -> Option<u64> {
        let v = self.parse::<u64>(key)?;
        if v == 0 {
            self.errors.push(field(key, "must be at least 1"));
            return None;
        }
        Some(v)
    }

    fn non_negative_f64(&mut self, key: &str) -> Option<f64> {
        let v = self.parse::<f64>(key)?;
        if !(v.is_finite() && v >= 0.0) {
            self.errors.push(field(key, "must be a finite non-negative number"));
            return None;
        }
        Some(v)
    }

    fn money(&mut self, key: &str) -> Option<Money> {
        let v = self.parse::<Money>(key)?;
        if v.is_negative() {
            self.errors.push(field(key, "must be non-negative"));
            return None;
        }
        Some(v)
    }

    /// Empty means `default`.
    fn positive_or(&mut self, key: &str, default: Option<u64>) -> Option<u64> {
        if self.flat.get(key).is_empty() {
            default
        } else {
            self.positive(key)
        }
    }

    fn strategy_name(&mut self, key: &str, name: &str) -> Option<String> {
        if STRATEGIES.contains(&name) {
            Some(name.to_string())
        } else {
            self.errors.push(field(key, format!("unknown strategy `{name}` (one of {})", STRATEGIES.join(", "))));
            None
        }
    }
}

impl RunConfig {
    /// Validates every field, reporting all problems at once.
    pub fn from_flat(flat: &Flat) -> Result<RunConfig, ConfigError> {
        let mut r = Reader { flat, errors: Vec::new() };
        let b = r.positive("clock.b");
        let total_slots = r.positive("clock.total_slots");
        let clock = match (b, total_slots) {
            (Some(b), Some(t)) => match SimClock::from_slots(b, t) {
                Ok(c) => Some(c),
                Err(e) => {
                    r.errors.push(field("clock.total_slots", e));
                    None
                }
            },
            _ => None,
        };
        let lambda = r.money("economics.lambda");
        let c_d = r.money("economics.c_d");
        let c_a = r.money("economics.c_a");
        let phi = r.positive("economics.phi");
        let s_max = r.parse::<u64>("economics.s_max");
        let fee_ceiling = r.money("economics.fee_ceiling");
        let interval = r.positive("dt.interval");

        let workload = match flat.get("workload.source") {
            "generated" => {
                let kind = r.parse::<PopularityKind>("workload.popularity.kind");
                if kind == Some(PopularityKind::Trace) {
                    r.errors.push(field("workload.popularity.kind", "`trace` requires workload.source = ingested"));
                }
                let popularity = PopularityProfile {
                    kind: kind.unwrap_or(PopularityKind::AgeShapedPoisson),
                    peak_scale: r.non_negative_f64("workload.popularity.peak_scale").unwrap_or(0.0),
                    peak_shape: r.non_negative_f64("workload.popularity.peak_shape").unwrap_or(1.0),
                    peak_cap: r.non_negative_f64("workload.popularity.peak_cap").unwrap_or(0.0),
                    rise_slot: r.non_negative_f64("workload.popularity.rise_slot").unwrap_or(1.0),
                    constant_rate: r.non_negative_f64("workload.popularity.constant_rate").unwrap_or(0.0),
                    tail_cutoff: r.non_negative_f64("workload.popularity.tail_cutoff").unwrap_or(1.0),
                };
                let cfg = WorkloadConfig {
                    total_contents: r.positive("workload.total_contents").unwrap_or(1),
                    total_slots: total_slots.unwrap_or(1),
                    size_range: (r.positive("workload.size_min").unwrap_or(1), r.positive("workload.size_max").unwrap_or(1)),
                    price_range: (
                        r.parse("workload.price_min").unwrap_or(0),
                        r.parse("workload.price_max").unwrap_or(0),
                    ),
                    fee_ceiling: fee_ceiling.unwrap_or(Money::ZERO),
                    popularity,
                    seed: r.parse("workload.seed").unwrap_or(0),
                };
                if let Err(e) = cfg.validate() {
                    r.errors.push(field("workload", e));
                }
                Some(WorkloadSource::Generated(cfg))
            }
            "ingested" => {
                let mut path = |key: &str| {
                    let p = flat.get(key);
                    if p.is_empty() {
                        r.errors.push(field(key, "required when workload.source = ingested"));
                    } else if !Path::new(p).is_file() {
                        r.errors.push(field(key, format!("no such file `{p}`")));
                    }
                    PathBuf::from(p)
                };
                let catalog = path("workload.catalog_file");
                let trace = path("workload.trace_file");
                let min_total_requests = r.parse("workload.min_total_requests").unwrap_or(0);
                Some(WorkloadSource::Ingested { catalog, trace, min_total_requests })
            }
            other => {
                r.errors.push(field("workload.source", format!("`{other}` (generated, ingested)")));
                None
            }
        };

        let name = r.strategy_name("strategy.name", flat.get("strategy.name"));
        let predictor = match flat.get("strategy.predictor") {
            "window" => Some(PredictorKind::Window),
            "plugin" => {
                if flat.get("strategy.plugin_command").is_empty() {
                    r.errors.push(field("strategy.plugin_command", "required when strategy.predictor = plugin"));
                }
                Some(PredictorKind::Plugin)
            }
            other => {
                r.errors.push(field("strategy.predictor", format!("`{other}` (window, plugin)")));
                None
            }
        };
        let predictor_window = r.positive_or("strategy.predictor_window", b);
        let window = r.positive_or("strategy.window", b);
        let eta = r.non_negative_f64("strategy.eta");
        let seed = r.parse::<u64>("strategy.seed");
        let timeout = r.positive("strategy.plugin_timeout_ms");

        let mut compare = Vec::new();
        for s in flat.get("compare.strategies").split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some(n) = r.strategy_name("compare.strategies", s) {
                if compare.contains(&n) {
                    r.errors.push(field("compare.strategies", format!("duplicate strategy `{n}`")));
                }
                compare.push(n);
            }
        }
        if compare.is_empty() {
            r.errors.push(field("compare.strategies", "must name at least one strategy"));
        }

        let sweep = match flat.get("sweep.axis") {
            "" => None,
            axis => match flat.resolve(axis) {
                Ok(axis) => {
                    let values: Vec<String> =
                        flat.get("sweep.values").split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
                    Some(SweepSpec { axis, values })
                }
                Err(e) => {
                    r.errors.push(field("sweep.axis", e));
                    None
                }
            },
        };
        let output_dir = PathBuf::from(flat.get("output.dir"));
        if output_dir.as_os_str().is_empty() {
            r.errors.push(field("output.dir", "must not be empty"));
        }

        if !r.errors.is_empty() {
            return Err(if r.errors.len() == 1 { r.errors.remove(0) } else { ConfigError::Many(r.errors) });
        }
        let params = EconomicParams {
            lambda: lambda.unwrap(),
            c_d: c_d.unwrap(),
            c_a: c_a.unwrap(),
            phi: phi.unwrap(),
            s_max: s_max.unwrap(),
        };
        Ok(RunConfig {
            engine: EngineConfig {
                clock: clock.unwrap(),
                params,
                schedule: UpdateSchedule::new(interval.unwrap()).expect("checked positive"),
            },
            workload: workload.unwrap(),
            strategy: StrategySpec {
                name: name.unwrap(),
                predictor: predictor.unwrap(),
                predictor_window: predictor_window.unwrap(),
                window: window.unwrap(),
                eta: eta.unwrap(),
                seed: seed.unwrap(),
                plugin_command: flat.get("strategy.plugin_command").to_string(),
                plugin_timeout: Duration::from_millis(timeout.unwrap()),
            },
            compare,
            sweep,
            output_dir,
        })
    }

    /// The sweep points as full configs, in the listed order.
    pub fn sweep_points(flat: &Flat) -> Result<Vec<(String, RunConfig)>, ConfigError> {
        let base = RunConfig::from_flat(flat)?;
        let spec = base.sweep.clone().ok_or_else(|| field("sweep.axis", "required for a sweep"))?;
        if spec.values.is_empty() {
            return Err(field("sweep.values", "must list at least one value"));
        }
        spec.values
            .iter()
            .map(|v| {
                let mut f = flat.clone();
                f.set(&spec.axis, v)?;
                Ok((v.clone(), RunConfig::from_flat(&f)?))
            })
            .collect()
    }
}

/// Builds the named strategy for one run over a workload whose trace is
/// `trace` and whose horizon ends at `end`.
pub fn build_strategy<'w>(
    name: &str,
    spec: &StrategySpec,
    trace: &'w crate::workload::RequestTrace,
    end: u64,
) -> Result<Box<dyn Strategy + 'w>, crate::predictor::PredictError> {
    let predictor = || -> Result<Box<dyn Predictor + 'w>, crate::predictor::PredictError> {
        Ok(match spec.predictor {
            PredictorKind::Window => Box::new(WindowAverage::new(spec.predictor_window)),
            PredictorKind::Plugin => {
                let plugin = PluginPredictor::spawn(&spec.plugin_command, spec.plugin_timeout)?;
                Box::new(WithFallback::new(plugin, WindowAverage::new(spec.predictor_window)))
            }
        })
    };
    Ok(match name {
        "dtoca" => Box::new(DtOca::new("dtoca", predictor()?)),
        "dtoca-pp" => Box::new(DtOca::perfect(trace, end)),
        "oplfu" => Box::new(OpLfu::new(predictor()?)),
        "wlfu" => Box::new(WLfu::new(spec.window)),
        "fifo" => Box::new(Fifo),
        "ftpl" => Box::new(Ftpl::new(spec.eta, spec.seed)),
        "random" => Box::new(Random::new(spec.seed)),
        "greedy-offline" => Box::new(GreedyOffline::new(trace, end)),
        other => unreachable!("strategy `{other}` passed validation"),
    })
}
