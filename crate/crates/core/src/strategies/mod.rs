//! Decision policies behind one contract: the online DT-based optimizer, the
//! greedy offline reference and the ranking benchmarks.

mod benchmarks;
mod dtoca;

use std::collections::HashMap;

use thiserror::Error;

use crate::dt::DtSnapshot;
use crate::model::{Catalog, ContentIdx, EconomicParams, PeriodPlan, Slot};
use crate::money::Money;
use crate::optimizer::OptimizerError;
use crate::predictor::{PredictError, PredictionRequest, Predictor};

pub use benchmarks::{Fifo, Ftpl, OpLfu, Random, Scripted, WLfu, FTPL_DOMAIN, RANDOM_DOMAIN};
pub use dtoca::{greedy_offline_plan, DtOca, GreedyOffline};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("{0}")]
    Other(String),
}

/// Inputs at a period's first slot.
pub struct PeriodContext<'a, 'w> {
    pub period: u64,
    pub now: Slot,
    pub b: u64,
    pub snapshot: &'a DtSnapshot<'w>,
    /// N_p†, index order.
    pub purchasable: &'a [ContentIdx],
    /// Contents cached through the previous period's last slot, index order.
    pub cached: &'a [ContentIdx],
    /// Announced fee for every content in `purchasable` and `cached`.
    pub fees: &'a HashMap<ContentIdx, Money>,
    pub params: &'a EconomicParams,
}

impl<'w> PeriodContext<'_, 'w> {
    pub fn catalog(&self) -> &'w Catalog {
        &self.snapshot.workload().catalog
    }

    pub fn fee(&self, idx: ContentIdx) -> Money {
        self.fees[&idx]
    }

    pub fn is_cached(&self, idx: ContentIdx) -> bool {
        self.cached.binary_search(&idx).is_ok()
    }

    /// `purchasable ∪ cached` in index order, flagged `true` when cached.
    pub fn candidates(&self) -> Vec<(ContentIdx, bool)> {
        let (mut i, mut j) = (0, 0);
        let (p, c) = (self.purchasable, self.cached);
        let mut out = Vec::with_capacity(p.len() + c.len());
        while i < p.len() || j < c.len() {
            if j == c.len() || (i < p.len() && p[i] < c[j]) {
                out.push((p[i], false));
                i += 1;
            } else {
                if i < p.len() && p[i] == c[j] {
                    i += 1;
                }
                out.push((c[j], true));
                j += 1;
            }
        }
        out
    }
}

/// Inputs at a DT update slot inside a period.
pub struct MidPeriodContext<'a, 'w> {
    pub period: u64,
    pub now: Slot,
    /// First slot of the next period.
    pub period_end: Slot,
    pub snapshot: &'a DtSnapshot<'w>,
    /// Currently cached contents with the slot they will be released at.
    pub cached: &'a [(ContentIdx, Slot)],
    pub fees: &'a HashMap<ContentIdx, Money>,
    pub params: &'a EconomicParams,
}

/// Realized utility of one cached content over a finished period.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContentOutcome {
    pub content: ContentIdx,
    pub utility: Money,
}

pub trait Strategy {
    fn name(&self) -> &str;

    fn period_start(&mut self, ctx: &PeriodContext<'_, '_>) -> Result<PeriodPlan, StrategyError>;

    /// Revised remaining prefix lengths for cached contents; `0` releases now.
    fn mid_period(&mut self, _ctx: &MidPeriodContext<'_, '_>) -> Result<Vec<(ContentIdx, u32)>, StrategyError> {
        Ok(Vec::new())
    }

    /// Called once a period is over with the realized utilities of the
    /// contents it cached.
    fn observe(&mut self, _period: u64, _outcomes: &[ContentOutcome]) {}

    fn fallback_events(&self) -> u64 {
        0
    }
}

/// Builds forecast queries from the snapshot.
pub fn prediction_requests(
    snapshot: &DtSnapshot<'_>,
    contents: impl IntoIterator<Item = ContentIdx>,
    now: Slot,
    horizon: usize,
    predictor: &dyn Predictor,
) -> Vec<PredictionRequest> {
    let catalog = &snapshot.workload().catalog;
    let need = predictor.history_needed();
    contents
        .into_iter()
        .map(|idx| {
            let e = catalog.get(idx);
            PredictionRequest {
                id: e.id,
                content: idx,
                history: if need == Some(0) { Vec::new() } else { snapshot.history(idx, need) },
                horizon,
                t_gen: e.t_gen,
                snapshot: snapshot.taken_at(),
                now,
            }
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::dt::take_snapshot;
    use crate::model::{service_fee, aoi, ContentCatalogEntry, ContentId};
    use crate::workload::{RequestTrace, TraceRow, Workload};

    pub fn params(s_max: u64) -> EconomicParams {
        EconomicParams {
            lambda: Money::from_units(1),
            c_d: Money::from_units(1),
            c_a: "0.1".parse().unwrap(),
            phi: 30,
            s_max,
        }
    }

    /// Contents `(t_gen, size, price)` with dense counts starting at `t_gen + 1`.
    pub fn workload(contents: &[(u64, u64, i64)], counts: &[Vec<u32>]) -> Workload {
        let entries = contents
            .iter()
            .enumerate()
            .map(|(i, &(t_gen, size, price))| ContentCatalogEntry {
                id: ContentId(i as u64),
                t_gen,
                size,
                price: Money::from_units(price),
                fee_ceiling: Money::from_units(30),
            })
            .collect();
        let catalog = crate::model::Catalog::new(entries).unwrap();
        let rows = catalog
            .entries()
            .iter()
            .map(|e| TraceRow { start: e.t_gen + 1, counts: counts[e.id.0 as usize].clone() })
            .collect();
        Workload::new(catalog, RequestTrace::from_rows(rows))
    }

    /// Runs `f` with a fresh period context at `now` with fallback fees.
    pub fn with_ctx<R>(
        w: &Workload,
        now: Slot,
        b: u64,
        cached: &[ContentIdx],
        params: &EconomicParams,
        f: impl FnOnce(&PeriodContext<'_, '_>) -> R,
    ) -> R {
        let snap = take_snapshot(w, now, params.phi);
        let purchasable = crate::dt::visible_purchasable_set(&snap, now, params.phi);
        let fees = purchasable
            .iter()
            .chain(cached)
            .map(|&i| {
                let e = w.catalog.get(i);
                (i, service_fee(e, None, aoi(now, e.t_gen), params))
            })
            .collect();
        let ctx = PeriodContext {
            period: now / b,
            now,
            b,
            snapshot: &snap,
            purchasable: &purchasable,
            cached,
            fees: &fees,
            params,
        };
        f(&ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn candidates_merge_and_flag_cached() {
        let w = workload(&[(0, 1, 1), (1, 1, 1), (2, 1, 1), (3, 1, 1)], &[vec![], vec![], vec![], vec![]]);
        let p = params(10);
        let cached = [ContentIdx(1), ContentIdx(3)];
        // Everything generated before 4 is purchasable.
        with_ctx(&w, 4, 2, &cached, &p, |ctx| {
            assert_eq!(
                ctx.candidates(),
                vec![(ContentIdx(0), false), (ContentIdx(1), true), (ContentIdx(2), false), (ContentIdx(3), true)]
            );
        });
    }
}
