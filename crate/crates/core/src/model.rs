//! Domain types and per-content economics: AoI, the two-timescale clock,
//! service fees, realized utility and capacity accounting.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;

/// A time-slot index.
pub type Slot = u64;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("slots per period must be positive")]
    ZeroPeriodLength,
    #[error("total slots {total} is not a multiple of the period length {b}")]
    RaggedClock { total: u64, b: u64 },
    #[error("content {0}: size must be at least 1")]
    ZeroSize(ContentId),
    #[error("content {0}: negative price")]
    NegativePrice(ContentId),
    #[error("content {0}: negative fee ceiling")]
    NegativeFeeCeiling(ContentId),
    #[error("duplicate content id {0}")]
    DuplicateId(ContentId),
    #[error("economic parameter `{0}` must be non-negative")]
    NegativeParam(&'static str),
    #[error("capacity exceeded: {occupied} > {s_max}")]
    CapacityExceeded { occupied: u64, s_max: u64 },
    #[error("content {0} admitted while already cached")]
    AlreadyCached(ContentIdx),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// External content identifier, as it appears in catalog and trace files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentId(pub u64);

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Position of a content inside a [`Catalog`]. Catalogs are ordered by
/// generation slot, so index order is also generation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContentIdx(pub u32);

impl ContentIdx {
    pub fn get(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ContentIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Age of information of a content generated at `t_gen`, observed at `t`.
pub fn aoi(t: Slot, t_gen: Slot) -> u64 {
    t.saturating_sub(t_gen)
}

/// Splits a slot into `(period, offset)` for periods of `b` slots.
pub fn slot_to_period(t: Slot, b: u64) -> (u64, u64) {
    assert!(b >= 1, "period length must be positive");
    (t / b, t % b)
}

/// Two-timescale clock: `periods` cache periods of `b` slots each.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    b: u64,
    periods: u64,
    /// Slot duration in seconds. Metadata only; all arithmetic is in slots.
    pub tau_secs: f64,
}

impl SimClock {
    pub fn new(b: u64, periods: u64) -> Result<Self, ModelError> {
        if b == 0 {
            return Err(ModelError::ZeroPeriodLength);
        }
        Ok(SimClock { b, periods, tau_secs: 1.0 })
    }

    /// Builds a clock from a total slot count, rejecting `T` not divisible by `b`.
    pub fn from_slots(b: u64, total_slots: u64) -> Result<Self, ModelError> {
        if b == 0 {
            return Err(ModelError::ZeroPeriodLength);
        }
        if !total_slots.is_multiple_of(b) {
            return Err(ModelError::RaggedClock { total: total_slots, b });
        }
        Self::new(b, total_slots / b)
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn periods(&self) -> u64 {
        self.periods
    }

    pub fn total_slots(&self) -> u64 {
        self.b * self.periods
    }

    pub fn period_of(&self, t: Slot) -> u64 {
        slot_to_period(t, self.b).0
    }

    pub fn period_start(&self, l: u64) -> Slot {
        self.b * l
    }

    pub fn period_slots(&self, l: u64) -> Range<Slot> {
        self.b * l..self.b * (l + 1)
    }
}

/// A content as sold by its provider.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentCatalogEntry {
    pub id: ContentId,
    pub t_gen: Slot,
    /// Cache units.
    pub size: u64,
    /// Provider price.
    pub price: Money,
    /// Fee charged for a perfectly fresh delivery before the AoI discount.
    pub fee_ceiling: Money,
}

impl ContentCatalogEntry {
    fn validate(&self) -> Result<(), ModelError> {
        if self.size == 0 {
            return Err(ModelError::ZeroSize(self.id));
        }
        if self.price.is_negative() {
            return Err(ModelError::NegativePrice(self.id));
        }
        if self.fee_ceiling.is_negative() {
            return Err(ModelError::NegativeFeeCeiling(self.id));
        }
        Ok(())
    }

    /// Cost of buying the content and pulling it over the backhaul.
    pub fn purchase_cost(&self, params: &EconomicParams) -> Money {
        self.price + params.c_d.times(self.size)
    }

    /// Revenue plus backhaul savings of serving one request at `fee`.
    pub fn request_margin(&self, fee: Money, params: &EconomicParams) -> Money {
        fee + params.c_d.times(self.size)
    }

    /// Cost of keeping the content cached for one slot.
    pub fn slot_cost(&self, params: &EconomicParams) -> Money {
        params.c_a.times(self.size)
    }
}

/// Catalog ordered by `(t_gen, id)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Catalog {
    entries: Vec<ContentCatalogEntry>,
    by_id: HashMap<ContentId, ContentIdx>,
}

impl Catalog {
    pub fn new(mut entries: Vec<ContentCatalogEntry>) -> Result<Self, ModelError> {
        entries.sort_by_key(|e| (e.t_gen, e.id));
        let mut by_id = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            e.validate()?;
            if by_id.insert(e.id, ContentIdx(i as u32)).is_some() {
                return Err(ModelError::DuplicateId(e.id));
            }
        }
        Ok(Catalog { entries, by_id })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ContentCatalogEntry] {
        &self.entries
    }

    pub fn get(&self, idx: ContentIdx) -> &ContentCatalogEntry {
        &self.entries[idx.get()]
    }

    pub fn index_of(&self, id: ContentId) -> Option<ContentIdx> {
        self.by_id.get(&id).copied()
    }

    pub fn indices(&self) -> impl Iterator<Item = ContentIdx> + '_ {
        (0..self.entries.len() as u32).map(ContentIdx)
    }

    /// Indices of contents with `lo <= t_gen < hi`, in index order.
    pub fn generated_between(&self, lo: Slot, hi: Slot) -> Range<u32> {
        let start = self.entries.partition_point(|e| e.t_gen < lo);
        let end = self.entries.partition_point(|e| e.t_gen < hi);
        start as u32..end.max(start) as u32
    }

    /// True purchasable set at slot `t`: contents with `0 < aoi(t) <= phi`.
    pub fn purchasable_at(&self, t: Slot, phi: u64) -> Vec<ContentIdx> {
        self.generated_between(t.saturating_sub(phi), t)
            .map(ContentIdx)
            .collect()
    }

    pub fn max_size(&self) -> Option<u64> {
        self.entries.iter().map(|e| e.size).max()
    }
}

/// Market and cache parameters shared by every strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconomicParams {
    /// Fee discount per slot of average AoI.
    pub lambda: Money,
    /// Backhaul transmission cost per size unit.
    pub c_d: Money,
    /// Caching cost per size unit per slot.
    pub c_a: Money,
    /// Freshness threshold in slots.
    pub phi: u64,
    /// Cache capacity in size units.
    pub s_max: u64,
}

impl EconomicParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [("lambda", self.lambda), ("c_d", self.c_d), ("c_a", self.c_a)] {
            if v.is_negative() {
                return Err(ModelError::NegativeParam(name));
            }
        }
        Ok(())
    }

    /// Logs a warning when nothing in the catalog fits into the cache.
    pub fn check_against(&self, catalog: &Catalog) {
        if let Some(min) = catalog.entries().iter().map(|e| e.size).min() {
            if min > self.s_max {
                log::warn!("s_max={} is below every content size (min {min})", self.s_max);
            }
        }
    }
}

/// Request-weighted sum of delivery AoI, kept as an exact ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ServedStats {
    pub served: u64,
    pub aoi_sum: u64,
}

impl ServedStats {
    pub fn record(&mut self, count: u64, delivery_aoi: u64) {
        self.served += count;
        self.aoi_sum += count * delivery_aoi;
    }

    pub fn merge(&mut self, other: ServedStats) {
        self.served += other.served;
        self.aoi_sum += other.aoi_sum;
    }

    pub fn average(&self) -> Option<AvgAoi> {
        (self.served > 0).then_some(AvgAoi { weighted: self.aoi_sum, count: self.served })
    }
}

/// Average AoI as a ratio of integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AvgAoi {
    pub weighted: u64,
    pub count: u64,
}

impl AvgAoi {
    pub fn value(&self) -> f64 {
        self.weighted as f64 / self.count as f64
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no requests served")]
pub struct NoRequests;

/// Request-weighted mean delivery AoI over `(slot, count, delivery_aoi)` rows.
pub fn average_aoi(served: &[(Slot, u64, u64)]) -> Result<AvgAoi, NoRequests> {
    let mut stats = ServedStats::default();
    for &(_, count, a) in served {
        stats.record(count, a);
    }
    stats.average().ok_or(NoRequests)
}

/// Fee announced for a period: the fee ceiling minus `lambda` times the
/// previous period's average AoI, or times `fallback_aoi` when the previous
/// period has no served requests. Not clamped at zero.
pub fn service_fee(
    entry: &ContentCatalogEntry,
    prev_avg_aoi: Option<AvgAoi>,
    fallback_aoi: u64,
    params: &EconomicParams,
) -> Money {
    let discount = match prev_avg_aoi {
        Some(avg) => params.lambda.mul_ratio(avg.weighted, avg.count),
        None => params.lambda.times(fallback_aoi),
    };
    entry.fee_ceiling - discount
}

/// Utility of one content over one period, from the actual request counts of
/// the period (`actual[d]` is the count at the period's `d`-th slot).
pub fn realized_utility(
    entry: &ContentCatalogEntry,
    purchase: bool,
    prefix_len: u32,
    fee: Money,
    actual: &[u32],
    params: &EconomicParams,
) -> Money {
    let margin = entry.request_margin(fee, params);
    let slot_cost = entry.slot_cost(params);
    let mut u: Money = actual
        .iter()
        .take(prefix_len as usize)
        .map(|&r| margin.times(r as u64) - slot_cost)
        .sum();
    if purchase {
        u -= entry.purchase_cost(params);
    }
    u
}

/// Contents currently in the cache and their total size.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CacheState {
    cached: BTreeMap<ContentIdx, u64>,
    occupied: u64,
}

impl CacheState {
    pub fn occupied(&self) -> u64 {
        self.occupied
    }

    pub fn contains(&self, idx: ContentIdx) -> bool {
        self.cached.contains_key(&idx)
    }

    pub fn len(&self) -> usize {
        self.cached.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cached.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ContentIdx, u64)> + '_ {
        self.cached.iter().map(|(&k, &v)| (k, v))
    }

    pub fn ids(&self) -> Vec<ContentIdx> {
        self.cached.keys().copied().collect()
    }

    /// Releases then admits, atomically. Releasing an id that is not cached is
    /// a logged no-op; overflowing `s_max` rejects the whole transaction.
    pub fn apply_cache_transaction(
        &self,
        release: &[ContentIdx],
        admit: &[(ContentIdx, u64)],
        s_max: u64,
    ) -> Result<CacheState, ModelError> {
        let mut next = self.clone();
        for idx in release {
            match next.cached.remove(idx) {
                Some(size) => next.occupied -= size,
                None => log::warn!("release of non-cached content {idx} ignored"),
            }
        }
        for &(idx, size) in admit {
            if next.cached.insert(idx, size).is_some() {
                return Err(ModelError::AlreadyCached(idx));
            }
            next.occupied += size;
        }
        if next.occupied > s_max {
            return Err(ModelError::CapacityExceeded { occupied: next.occupied, s_max });
        }
        debug_assert_eq!(next.occupied, next.cached.values().sum::<u64>());
        Ok(next)
    }
}

/// One selected content in a period plan. Contents absent from the plan are
/// not cached at the period's first slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlanEntry {
    pub content: ContentIdx,
    pub purchase: bool,
    /// Number of leading slots of the period the content stays cached.
    pub prefix_len: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PeriodPlan {
    pub entries: Vec<PlanEntry>,
}

impl PeriodPlan {
    /// Checks the plan against the period's visible purchasable set and the
    /// currently cached set (both sorted), and the capacity at the first slot.
    pub fn validate(
        &self,
        b: u64,
        purchasable: &[ContentIdx],
        cached: &[ContentIdx],
        catalog: &Catalog,
        s_max: u64,
    ) -> Result<(), ModelError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut size = 0;
        for e in &self.entries {
            if !seen.insert(e.content) {
                return Err(ModelError::InvalidPlan(format!("{} listed twice", e.content)));
            }
            if e.prefix_len == 0 || e.prefix_len as u64 > b {
                return Err(ModelError::InvalidPlan(format!(
                    "{} has prefix {} outside [1, {b}]",
                    e.content, e.prefix_len
                )));
            }
            let is_cached = cached.binary_search(&e.content).is_ok();
            // Purchasing a cached content releases it at the boundary and buys it again.
            if e.purchase {
                if purchasable.binary_search(&e.content).is_err() {
                    return Err(ModelError::InvalidPlan(format!("{} is not purchasable", e.content)));
                }
            } else if !is_cached {
                return Err(ModelError::InvalidPlan(format!("{} retained but not cached", e.content)));
            }
            size += catalog.get(e.content).size;
        }
        if size > s_max {
            return Err(ModelError::CapacityExceeded { occupied: size, s_max });
        }
        Ok(())
    }
}
