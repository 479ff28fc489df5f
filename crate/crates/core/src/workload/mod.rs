//! Synthetic catalogs and request traces, and ingestion of recorded logs.
//!
//! The default request process is a per-content Poisson stream whose intensity
//! rises and then decays with the content's age:
//!
//! ```text
//! rate_n(a) = peak_n * (a / a0) * exp(1 - a / a0)
//! ```
//!
//! with `peak_n` Pareto-distributed across contents, so a handful of contents
//! are hot and fresh contents draw most of the traffic. Each content draws from
//! its own deterministic RNG substream, which keeps generation reproducible
//! regardless of how the work is split across threads.

pub(crate) mod io;

pub use io::{ingest_trace, read_catalog, read_trace, write_catalog, write_trace, IngestOptions};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto, Poisson};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Catalog, ContentCatalogEntry, ContentId, ContentIdx, ModelError, Slot};
use crate::money::Money;
use crate::par::{self, Exec};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },
    #[error("{path}:{line}: content id {id} is not in the catalog")]
    UnknownContent { path: String, line: u64, id: ContentId },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// RNG substream for `(seed, domain, id)`.
pub fn substream(seed: u64, domain: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(id);
    rng
}

const CATALOG_DOMAIN: u64 = 1;
const REQUEST_DOMAIN: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PopularityKind {
    AgeShapedPoisson,
    ConstantPoisson,
    /// Requests come from an ingested trace; nothing is generated.
    Trace,
}

impl std::str::FromStr for PopularityKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "age-shaped-poisson" => Ok(Self::AgeShapedPoisson),
            "constant-poisson" => Ok(Self::ConstantPoisson),
            "trace" => Ok(Self::Trace),
            other => Err(format!("unknown popularity kind `{other}`")),
        }
    }
}

impl PopularityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::AgeShapedPoisson => "age-shaped-poisson",
            Self::ConstantPoisson => "constant-poisson",
            Self::Trace => "trace",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PopularityProfile {
    pub kind: PopularityKind,
    /// Pareto scale (minimum) of the per-content peak rate.
    pub peak_scale: f64,
    /// Pareto tail index of the per-content peak rate.
    pub peak_shape: f64,
    /// Upper clamp on the peak rate.
    pub peak_cap: f64,
    /// Age (slots) at which the intensity peaks.
    pub rise_slot: f64,
    /// Rate for [`PopularityKind::ConstantPoisson`].
    pub constant_rate: f64,
    /// Past the peak, the stream stops once the intensity drops below this.
    pub tail_cutoff: f64,
}

impl Default for PopularityProfile {
    fn default() -> Self {
        PopularityProfile {
            kind: PopularityKind::AgeShapedPoisson,
            peak_scale: 0.6,
            peak_shape: 1.6,
            peak_cap: 60.0,
            rise_slot: 8.0,
            constant_rate: 1.0,
            tail_cutoff: 1e-3,
        }
    }
}

impl PopularityProfile {
    /// Unimodal age response, 1 at `a = rise_slot`, 0 at `a = 0`.
    pub fn shape(&self, age: u64) -> f64 {
        let x = age as f64 / self.rise_slot;
        x * (1.0 - x).exp()
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::Config(m.to_string()));
        if !(self.peak_scale >= 0.0 && self.peak_cap >= 0.0 && self.constant_rate >= 0.0) {
            return bad("rates must be non-negative");
        }
        if self.peak_shape <= 0.0 {
            return bad("peak_shape must be positive");
        }
        if self.rise_slot <= 0.0 {
            return bad("rise_slot must be positive");
        }
        if self.tail_cutoff <= 0.0 {
            return bad("tail_cutoff must be positive");
        }
        Ok(())
    }

    fn peak_rate(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.peak_scale == 0.0 {
            return 0.0;
        }
        let p = Pareto::new(self.peak_scale, self.peak_shape).expect("validated");
        p.sample(rng).min(self.peak_cap)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadConfig {
    pub total_contents: u64,
    pub total_slots: u64,
    pub size_range: (u64, u64),
    /// Provider price range in whole money units.
    pub price_range: (u64, u64),
    pub fee_ceiling: Money,
    pub popularity: PopularityProfile,
    pub seed: u64,
}

impl WorkloadConfig {
    /// Full experimental scale: 300,000 contents over 30,000 slots.
    pub fn paper() -> Self {
        WorkloadConfig {
            total_contents: 300_000,
            total_slots: 30_000,
            size_range: (2, 50),
            price_range: (20, 200),
            fee_ceiling: Money::from_units(30),
            popularity: PopularityProfile::default(),
            seed: 1,
        }
    }

    /// Ten times shorter, same densities.
    pub fn small() -> Self {
        WorkloadConfig { total_contents: 30_000, total_slots: 3_000, ..Self::paper() }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::Config(m.to_string()));
        if self.total_contents == 0 {
            return bad("total_contents must be at least 1");
        }
        if self.total_slots == 0 {
            return bad("total_slots must be at least 1");
        }
        if self.size_range.0 == 0 || self.size_range.0 > self.size_range.1 {
            return bad("size range must be non-empty and start at 1 or more");
        }
        if self.price_range.0 > self.price_range.1 {
            return bad("price range must be non-empty");
        }
        if self.fee_ceiling.is_negative() {
            return bad("fee ceiling must be non-negative");
        }
        self.popularity.validate()
    }
}

/// Per-content request counts, row `i` belonging to catalog index `i`.
/// `counts[j]` is the count at slot `start + j`; slots outside are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceRow {
    pub start: Slot,
    pub counts: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RequestTrace {
    rows: Vec<TraceRow>,
}

impl RequestTrace {
    pub fn from_rows(rows: Vec<TraceRow>) -> Self {
        RequestTrace { rows }
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, idx: ContentIdx, t: Slot) -> u32 {
        let row = &self.rows[idx.get()];
        if t < row.start {
            return 0;
        }
        row.counts.get((t - row.start) as usize).copied().unwrap_or(0)
    }

    /// Dense counts for slots `from..to`.
    pub fn window(&self, idx: ContentIdx, from: Slot, to: Slot) -> Vec<u32> {
        (from..to).map(|t| self.count(idx, t)).collect()
    }

    pub fn total(&self, idx: ContentIdx) -> u64 {
        self.rows[idx.get()].counts.iter().map(|&c| c as u64).sum()
    }

    /// Total requests per slot over `0..total_slots`.
    pub fn slot_totals(&self, total_slots: u64) -> Vec<u64> {
        let mut totals = vec![0u64; total_slots as usize];
        for row in &self.rows {
            for (j, &c) in row.counts.iter().enumerate() {
                let t = row.start as usize + j;
                if t < totals.len() {
                    totals[t] += c as u64;
                }
            }
        }
        totals
    }

    /// SHA-256 over the non-zero cells, in index order.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &c) in row.counts.iter().enumerate() {
                if c > 0 {
                    h.update((i as u64).to_le_bytes());
                    h.update((row.start + j as u64).to_le_bytes());
                    h.update(c.to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }
}

/// A catalog with its aligned request trace.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Workload {
    pub catalog: Catalog,
    pub trace: RequestTrace,
}

impl Workload {
    pub fn new(catalog: Catalog, trace: RequestTrace) -> Self {
        assert_eq!(catalog.len(), trace.len(), "trace rows must align with the catalog");
        Workload { catalog, trace }
    }
}

pub fn generate_catalog(config: &WorkloadConfig, exec: Exec) -> Result<Catalog, WorkloadError> {
    config.validate()?;
    let entries = par::map_range(exec, config.total_contents as usize, |i| {
        let mut rng = substream(config.seed, CATALOG_DOMAIN, i as u64);
        ContentCatalogEntry {
            id: ContentId(i as u64),
            t_gen: rng.random_range(0..config.total_slots),
            size: rng.random_range(config.size_range.0..=config.size_range.1),
            price: Money::from_units(
                rng.random_range(config.price_range.0..=config.price_range.1) as i64,
            ),
            fee_ceiling: config.fee_ceiling,
        }
    });
    Ok(Catalog::new(entries)?)
}

/// Draws request counts for every content up to `total_slots`.
pub fn generate_requests(
    catalog: &Catalog,
    profile: &PopularityProfile,
    total_slots: u64,
    seed: u64,
    exec: Exec,
) -> Result<RequestTrace, WorkloadError> {
    profile.validate()?;
    if profile.kind == PopularityKind::Trace {
        return Err(WorkloadError::Config(
            "trace popularity is ingested, not generated".into(),
        ));
    }
    let rows = par::map(exec, catalog.entries(), |e| {
        let mut rng = substream(seed, REQUEST_DOMAIN, e.id.0);
        let start = e.t_gen + 1;
        let mut counts = Vec::new();
        let peak = match profile.kind {
            PopularityKind::AgeShapedPoisson => profile.peak_rate(&mut rng),
            _ => profile.constant_rate,
        };
        let mut t = start;
        while t < total_slots {
            let age = t - e.t_gen;
            let rate = match profile.kind {
                PopularityKind::AgeShapedPoisson => peak * profile.shape(age),
                _ => peak,
            };
            if profile.kind == PopularityKind::AgeShapedPoisson
                && age as f64 > profile.rise_slot
                && rate < profile.tail_cutoff
            {
                break;
            }
            let c = if rate > 0.0 {
                Poisson::new(rate).expect("positive rate").sample(&mut rng) as u32
            } else {
                0
            };
            counts.push(c);
            t += 1;
        }
        while counts.last() == Some(&0) {
            counts.pop();
        }
        TraceRow { start, counts }
    });
    Ok(RequestTrace::from_rows(rows))
}

pub fn generate(config: &WorkloadConfig, exec: Exec) -> Result<Workload, WorkloadError> {
    let catalog = generate_catalog(config, exec)?;
    let trace = generate_requests(&catalog, &config.popularity, config.total_slots, config.seed, exec)?;
    Ok(Workload::new(catalog, trace))
}
