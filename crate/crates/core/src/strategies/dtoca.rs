use crate::model::{ContentIdx, PeriodPlan, PlanEntry, Slot};
use crate::money::Money;
use crate::optimizer::{
    best_prefix_utility, best_remaining_prefix, knapsack_01, ContentTerms, KnapsackItem,
};
use crate::predictor::{PerfectPredictor, Predictor};
use crate::workload::RequestTrace;

use super::{prediction_requests, MidPeriodContext, PeriodContext, Strategy, StrategyError};

/// Online DT-based caching: per-content prefix evaluation on predicted
/// requests, a 0-1 knapsack across contents at period starts, and
/// remaining-prefix revisions at mid-period DT updates.
///
/// With a [`PerfectPredictor`] this is the perfect-prediction variant.
pub struct DtOca<'w> {
    name: String,
    predictor: Box<dyn Predictor + 'w>,
}

impl<'w> DtOca<'w> {
    pub fn new(name: impl Into<String>, predictor: Box<dyn Predictor + 'w>) -> Self {
        DtOca { name: name.into(), predictor }
    }

    pub fn perfect(trace: &'w RequestTrace, end: Slot) -> Self {
        DtOca::new("dtoca-pp", Box::new(PerfectPredictor::new(trace, end)))
    }
}

/// Evaluates each `(content, purchase)` candidate on `predictions` and solves
/// the period knapsack. Returns the plan and its predicted utility.
fn solve_period(
    ctx: &PeriodContext<'_, '_>,
    candidates: &[(ContentIdx, bool)],
    predictions: &[Vec<f64>],
) -> Result<(PeriodPlan, Money), StrategyError> {
    let catalog = ctx.catalog();
    let mut prefixes = Vec::with_capacity(candidates.len());
    let mut items = Vec::with_capacity(candidates.len());
    for (&(idx, purchase), pred) in candidates.iter().zip(predictions) {
        let e = catalog.get(idx);
        let terms = ContentTerms::new(e, ctx.fee(idx), ctx.params);
        let cost = if purchase { e.purchase_cost(ctx.params) } else { Money::ZERO };
        let eval = best_prefix_utility(pred, ctx.b as usize, &terms, cost)?;
        prefixes.push(eval.best_prefix_len);
        items.push(KnapsackItem { id: items.len() as u64, value: eval.best_utility, weight: e.size });
    }
    let sol = knapsack_01(&items, ctx.params.s_max);
    let entries = sol
        .selected
        .iter()
        .map(|&j| {
            let (content, purchase) = candidates[j as usize];
            PlanEntry { content, purchase, prefix_len: prefixes[j as usize] }
        })
        .collect();
    Ok((PeriodPlan { entries }, sol.total))
}

impl Strategy for DtOca<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn period_start(&mut self, ctx: &PeriodContext<'_, '_>) -> Result<PeriodPlan, StrategyError> {
        // Cached contents continue for free, so they never appear as purchases.
        let candidates: Vec<(ContentIdx, bool)> = ctx.candidates().into_iter().map(|(i, c)| (i, !c)).collect();
        let requests = prediction_requests(
            ctx.snapshot,
            candidates.iter().map(|c| c.0),
            ctx.now,
            ctx.b as usize,
            self.predictor.as_ref(),
        );
        let predictions = self.predictor.predict_batch(&requests)?;
        Ok(solve_period(ctx, &candidates, &predictions)?.0)
    }

    fn mid_period(&mut self, ctx: &MidPeriodContext<'_, '_>) -> Result<Vec<(ContentIdx, u32)>, StrategyError> {
        let horizon = (ctx.period_end - ctx.now) as usize;
        let requests = prediction_requests(
            ctx.snapshot,
            ctx.cached.iter().map(|c| c.0),
            ctx.now,
            horizon,
            self.predictor.as_ref(),
        );
        let predictions = self.predictor.predict_batch(&requests)?;
        let catalog = &ctx.snapshot.workload().catalog;
        ctx.cached
            .iter()
            .zip(&predictions)
            .map(|(&(idx, _), pred)| {
                let terms = ContentTerms::new(catalog.get(idx), ctx.fees[&idx], ctx.params);
                Ok((idx, best_remaining_prefix(pred, &terms)?.best_prefix_len))
            })
            .collect()
    }

    fn fallback_events(&self) -> u64 {
        self.predictor.fallback_events()
    }
}

/// The greedy offline decision for one period: release everything, then buy
/// the per-period optimum from the visible purchasable set with true requests.
/// Returns the plan and its utility on the true requests.
pub fn greedy_offline_plan(
    ctx: &PeriodContext<'_, '_>,
    trace: &RequestTrace,
    end: Slot,
) -> Result<(PeriodPlan, Money), StrategyError> {
    let candidates: Vec<(ContentIdx, bool)> = ctx.purchasable.iter().map(|&i| (i, true)).collect();
    let mut perfect = PerfectPredictor::new(trace, end);
    let requests = prediction_requests(
        ctx.snapshot,
        ctx.purchasable.iter().copied(),
        ctx.now,
        ctx.b as usize,
        &perfect,
    );
    let predictions = perfect.predict_batch(&requests)?;
    solve_period(ctx, &candidates, &predictions)
}

/// Runs [`greedy_offline_plan`] every period. Mid-period updates are ignored:
/// with true requests the period-start prefix is already optimal.
pub struct GreedyOffline<'w> {
    trace: &'w RequestTrace,
    end: Slot,
}

impl<'w> GreedyOffline<'w> {
    pub fn new(trace: &'w RequestTrace, end: Slot) -> Self {
        GreedyOffline { trace, end }
    }
}

impl Strategy for GreedyOffline<'_> {
    fn name(&self) -> &str {
        "greedy-offline"
    }

    fn period_start(&mut self, ctx: &PeriodContext<'_, '_>) -> Result<PeriodPlan, StrategyError> {
        Ok(greedy_offline_plan(ctx, self.trace, self.end)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::predictor::WindowAverage;

    #[test]
    fn new_content_displaces_weaker_cached_one() {
        // Two size-6 contents, room for one. Content 0 is cached but cold;
        // content 1 is new and hot.
        let w = workload(&[(0, 6, 10), (5, 6, 10)], &[vec![0; 20], vec![0, 0, 0, 0, 9, 9, 9, 9]]);
        let p = params(10);
        let mut s = DtOca::perfect(&w.trace, 100);
        let plan = with_ctx(&w, 10, 4, &[ContentIdx(0)], &p, |ctx| s.period_start(ctx).unwrap());
        assert_eq!(plan.entries, vec![PlanEntry { content: ContentIdx(1), purchase: true, prefix_len: 4 }]);
    }

    #[test]
    fn nothing_profitable_means_empty_plan() {
        let w = workload(&[(0, 6, 10), (1, 3, 10)], &[vec![0; 20], vec![0; 20]]);
        let p = params(10);
        let mut s = DtOca::perfect(&w.trace, 100);
        let plan = with_ctx(&w, 4, 4, &[ContentIdx(0)], &p, |ctx| s.period_start(ctx).unwrap());
        assert!(plan.entries.is_empty());
    }

    #[test]
    fn cached_content_continues_without_purchase() {
        let w = workload(&[(0, 6, 10)], &[vec![5; 20]]);
        let p = params(10);
        let mut s = DtOca::perfect(&w.trace, 100);
        let plan = with_ctx(&w, 4, 4, &[ContentIdx(0)], &p, |ctx| s.period_start(ctx).unwrap());
        assert_eq!(plan.entries, vec![PlanEntry { content: ContentIdx(0), purchase: false, prefix_len: 4 }]);
        let mut g = GreedyOffline::new(&w.trace, 100);
        let (plan, value) = with_ctx(&w, 4, 4, &[ContentIdx(0)], &p, |ctx| {
            greedy_offline_plan(ctx, &w.trace, 100).map(|r| (g.period_start(ctx).unwrap(), r.1)).unwrap()
        });
        assert_eq!(plan.entries, vec![PlanEntry { content: ContentIdx(0), purchase: true, prefix_len: 4 }]);
        // 20 requests at fee 26 + 6, minus 4 slots of 0.6, minus 16 purchase.
        assert_eq!(value, Money::from_units(20 * 32 - 16) - "2.4".parse().unwrap());
    }

    #[test]
    fn greedy_with_empty_purchasable_set_does_nothing() {
        let w = workload(&[(50, 2, 1)], &[vec![3; 5]]);
        let p = params(10);
        let (plan, value) = with_ctx(&w, 4, 4, &[], &p, |ctx| greedy_offline_plan(ctx, &w.trace, 100).unwrap());
        assert!(plan.entries.is_empty());
        assert_eq!(value, Money::ZERO);
    }

    #[test]
    fn mid_period_releases_on_zero_forecast() {
        let w = workload(&[(0, 2, 1), (1, 2, 1)], &[vec![0; 20], vec![0, 0, 5, 0, 0, 0]]);
        let p = params(10);
        let snap = crate::dt::take_snapshot(&w, 5, p.phi);
        let fees = [(ContentIdx(0), Money::from_units(20)), (ContentIdx(1), Money::from_units(20))].into();
        let cached = [(ContentIdx(0), 8), (ContentIdx(1), 8)];
        let ctx = MidPeriodContext {
            period: 1,
            now: 5,
            period_end: 8,
            snapshot: &snap,
            cached: &cached,
            fees: &fees,
            params: &p,
        };
        let mut s = DtOca::perfect(&w.trace, 100);
        assert_eq!(s.mid_period(&ctx).unwrap(), vec![(ContentIdx(0), 0), (ContentIdx(1), 0)]);
        // Window average sees the 5 at slot 4 for content 1 and keeps it.
        let mut s = DtOca::new("dtoca", Box::new(WindowAverage::new(1)));
        let first = s.mid_period(&ctx).unwrap();
        assert_eq!(first, vec![(ContentIdx(0), 0), (ContentIdx(1), 3)]);
        assert_eq!(s.mid_period(&ctx).unwrap(), first);
    }
}
