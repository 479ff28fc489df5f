//! Slot-by-slot simulation, run records and everything computed from them.
//!
//! Per slot: DT update, period-start decisions, mid-period revisions at update
//! slots, releases, serving and cost accrual, occupancy check.

mod bound;
mod metrics;
mod report;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::dt::{take_snapshot, visible_purchasable_set, DtSnapshot, UpdateSchedule};
use crate::model::{
    aoi, service_fee, CacheState, ContentId, ContentIdx, EconomicParams, ModelError, ServedStats, SimClock, Slot,
};
use crate::money::Money;
use crate::strategies::{ContentOutcome, MidPeriodContext, PeriodContext, Strategy, StrategyError};
use crate::workload::Workload;

pub use bound::{cr_bound, cr_ratio, empirical_cr, offline_replay, BoundReport, CrError, EmpiricalCr};
pub use metrics::{compute_metrics, Metrics, PeriodMetrics};
pub use report::{emit_report, read_runlog, report_rows, write_runlog, ReportError, ReportRow};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("strategy `{strategy}` at slot {slot}: {source}")]
    Plan {
        strategy: String,
        slot: Slot,
        #[source]
        source: ModelError,
    },
    #[error("strategy `{strategy}` at slot {slot}: {source}")]
    Strategy {
        strategy: String,
        slot: Slot,
        #[source]
        source: StrategyError,
    },
    #[error("workload covers {got} slots but the clock has {want}")]
    Horizon { got: u64, want: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineConfig {
    pub clock: SimClock,
    pub params: EconomicParams,
    pub schedule: UpdateSchedule,
}

/// One content over one period in which it was cached at the first slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContentPeriodRow {
    pub period: u64,
    pub content: ContentIdx,
    pub id: ContentId,
    pub size: u64,
    pub price: Money,
    pub purchase: bool,
    /// Slots actually cached, counted from the period's first slot.
    pub prefix_len: u32,
    pub fee: Money,
    pub served: u64,
    pub aoi_sum: u64,
    /// Accrued slot by slot during the run.
    pub utility: Money,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunMeta {
    pub strategy: String,
    pub fallback_events: u64,
    pub trace_checksum: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub meta: RunMeta,
    pub config: EngineConfig,
    /// Ordered by period, then content index.
    pub rows: Vec<ContentPeriodRow>,
    /// All requests per period, served or not.
    pub period_requests: Vec<u64>,
    /// Occupied cache units at every slot, after serving.
    pub occupancy: Vec<u64>,
    /// Sum of every accrual the engine booked.
    pub total_utility: Money,
}

impl RunLog {
    pub fn period_rows(&self, period: u64) -> impl Iterator<Item = &ContentPeriodRow> {
        let start = self.rows.partition_point(|r| r.period < period);
        self.rows[start..].iter().take_while(move |r| r.period == period)
    }

    pub fn period_utility(&self, period: u64) -> Money {
        self.period_rows(period).map(|r| r.utility).sum()
    }
}

struct Open {
    row: ContentPeriodRow,
    stats: ServedStats,
}

struct Run<'w, 's> {
    w: &'w Workload,
    cfg: EngineConfig,
    strategy: &'s mut dyn Strategy,
    cache: CacheState,
    keep_until: BTreeMap<ContentIdx, Slot>,
    open: BTreeMap<ContentIdx, Open>,
    prev_stats: HashMap<ContentIdx, ServedStats>,
    rows: Vec<ContentPeriodRow>,
    total: Money,
}

impl Run<'_, '_> {
    fn plan_err(&self, slot: Slot, source: ModelError) -> EngineError {
        EngineError::Plan { strategy: self.strategy.name().to_string(), slot, source }
    }

    fn strategy_err(&self, slot: Slot, source: StrategyError) -> EngineError {
        EngineError::Strategy { strategy: self.strategy.name().to_string(), slot, source }
    }

    fn close_period(&mut self, period: u64) {
        let mut outcomes = Vec::with_capacity(self.open.len());
        self.prev_stats.clear();
        for (idx, o) in std::mem::take(&mut self.open) {
            outcomes.push(ContentOutcome { content: idx, utility: o.row.utility });
            self.prev_stats.insert(idx, o.stats);
            self.rows.push(o.row);
        }
        self.strategy.observe(period, &outcomes);
    }

    fn fee(&self, idx: ContentIdx, now: Slot) -> Money {
        let e = self.w.catalog.get(idx);
        let prev = self.prev_stats.get(&idx).and_then(|s| s.average());
        service_fee(e, prev, aoi(now, e.t_gen), &self.cfg.params)
    }

    fn period_start(&mut self, t: Slot, snapshot: &DtSnapshot<'_>) -> Result<(), EngineError> {
        let (b, params) = (self.cfg.clock.b(), self.cfg.params);
        let period = self.cfg.clock.period_of(t);
        let cached = self.cache.ids();
        let purchasable = visible_purchasable_set(snapshot, t, params.phi);
        let fees: HashMap<ContentIdx, Money> =
            purchasable.iter().chain(&cached).map(|&i| (i, self.fee(i, t))).collect();
        let ctx = PeriodContext {
            period,
            now: t,
            b,
            snapshot,
            purchasable: &purchasable,
            cached: &cached,
            fees: &fees,
            params: &params,
        };
        let plan = self.strategy.period_start(&ctx).map_err(|e| self.strategy_err(t, e))?;
        plan.validate(b, &purchasable, &cached, &self.w.catalog, params.s_max)
            .map_err(|e| self.plan_err(t, e))?;

        let retained: Vec<ContentIdx> = plan.entries.iter().filter(|e| !e.purchase).map(|e| e.content).collect();
        let release: Vec<ContentIdx> = cached.iter().copied().filter(|i| !retained.contains(i)).collect();
        let admit: Vec<(ContentIdx, u64)> = plan
            .entries
            .iter()
            .filter(|e| e.purchase)
            .map(|e| (e.content, self.w.catalog.get(e.content).size))
            .collect();
        self.cache = self.cache.apply_cache_transaction(&release, &admit, params.s_max).map_err(|e| self.plan_err(t, e))?;
        for i in &release {
            self.keep_until.remove(i);
        }
        for e in &plan.entries {
            let entry = self.w.catalog.get(e.content);
            self.keep_until.insert(e.content, t + e.prefix_len as u64);
            let utility = if e.purchase { -entry.purchase_cost(&params) } else { Money::ZERO };
            self.total += utility;
            let row = ContentPeriodRow {
                period,
                content: e.content,
                id: entry.id,
                size: entry.size,
                price: entry.price,
                purchase: e.purchase,
                prefix_len: 0,
                fee: fees[&e.content],
                served: 0,
                aoi_sum: 0,
                utility,
            };
            self.open.insert(e.content, Open { row, stats: ServedStats::default() });
        }
        Ok(())
    }

    fn mid_period(&mut self, t: Slot, snapshot: &DtSnapshot<'_>) -> Result<(), EngineError> {
        let period = self.cfg.clock.period_of(t);
        let period_end = self.cfg.clock.period_start(period + 1);
        // Contents whose prefix ends here are released as planned.
        let cached: Vec<(ContentIdx, Slot)> =
            self.keep_until.iter().filter(|&(_, &k)| k > t).map(|(&i, &k)| (i, k)).collect();
        if cached.is_empty() {
            return Ok(());
        }
        let fees: HashMap<ContentIdx, Money> = self.open.iter().map(|(&i, o)| (i, o.row.fee)).collect();
        let ctx = MidPeriodContext {
            period,
            now: t,
            period_end,
            snapshot,
            cached: &cached,
            fees: &fees,
            params: &self.cfg.params,
        };
        let revisions = self.strategy.mid_period(&ctx).map_err(|e| self.strategy_err(t, e))?;
        for (idx, k) in revisions {
            let until = t + k as u64;
            match self.keep_until.get_mut(&idx) {
                Some(slot) if until <= period_end => *slot = until,
                Some(_) => {
                    return Err(self.plan_err(t, ModelError::InvalidPlan(format!("{idx} kept past the period end"))))
                }
                None => return Err(self.plan_err(t, ModelError::InvalidPlan(format!("{idx} revised but not cached")))),
            }
        }
        Ok(())
    }

    fn release_expired(&mut self, t: Slot) {
        let expired: Vec<ContentIdx> = self.keep_until.iter().filter(|&(_, &k)| k <= t).map(|(&i, _)| i).collect();
        if expired.is_empty() {
            return;
        }
        self.cache = self
            .cache
            .apply_cache_transaction(&expired, &[], self.cfg.params.s_max)
            .expect("releases never overflow");
        for i in expired {
            self.keep_until.remove(&i);
        }
    }

    fn serve(&mut self, t: Slot) {
        let params = self.cfg.params;
        for (idx, _) in self.cache.iter() {
            let e = self.w.catalog.get(idx);
            let o = self.open.get_mut(&idx).expect("cached contents have an open row");
            let r = self.w.trace.count(idx, t) as u64;
            let accrual = e.request_margin(o.row.fee, &params).times(r) - e.slot_cost(&params);
            o.row.utility += accrual;
            self.total += accrual;
            o.row.prefix_len += 1;
            o.row.served += r;
            o.row.aoi_sum += r * aoi(t + 1, e.t_gen);
            o.stats.record(r, aoi(t + 1, e.t_gen));
        }
    }
}

/// Runs `strategy` over the whole clock. Deterministic given the inputs.
pub fn run_simulation(
    workload: &Workload,
    cfg: &EngineConfig,
    strategy: &mut dyn Strategy,
) -> Result<RunLog, EngineError> {
    let clock = cfg.clock;
    let t_end = clock.total_slots();
    if let Some(last) = workload.catalog.entries().last() {
        if last.t_gen >= t_end {
            return Err(EngineError::Horizon { got: last.t_gen + 1, want: t_end });
        }
    }
    let mut run = Run {
        w: workload,
        cfg: *cfg,
        strategy,
        cache: CacheState::default(),
        keep_until: BTreeMap::new(),
        open: BTreeMap::new(),
        prev_stats: HashMap::new(),
        rows: Vec::new(),
        total: Money::ZERO,
    };
    let slot_totals = workload.trace.slot_totals(t_end);
    let mut occupancy = Vec::with_capacity(t_end as usize);
    let mut snapshot = take_snapshot(workload, 0, cfg.params.phi);
    for t in 0..t_end {
        let update = cfg.schedule.is_update_slot(t);
        if update {
            snapshot = take_snapshot(workload, t, cfg.params.phi);
        }
        if t % clock.b() == 0 {
            if t > 0 {
                run.close_period(clock.period_of(t) - 1);
            }
            run.period_start(t, &snapshot)?;
        } else if update {
            run.mid_period(t, &snapshot)?;
        }
        run.release_expired(t);
        run.serve(t);
        let occupied = run.cache.occupied();
        if occupied > cfg.params.s_max {
            return Err(run.plan_err(t, ModelError::CapacityExceeded { occupied, s_max: cfg.params.s_max }));
        }
        occupancy.push(occupied);
    }
    if t_end > 0 {
        run.close_period(clock.periods() - 1);
    }
    let period_requests = slot_totals.chunks(clock.b() as usize).map(|c| c.iter().sum()).collect();
    let fallback_events = run.strategy.fallback_events();
    let meta = RunMeta {
        strategy: run.strategy.name().to_string(),
        fallback_events,
        trace_checksum: workload.trace.checksum(),
    };
    Ok(RunLog { meta, config: *cfg, rows: run.rows, period_requests, occupancy, total_utility: run.total })
}
