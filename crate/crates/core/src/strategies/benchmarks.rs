//! Ranking policies: each ranks `purchasable ∪ cached` and fills the cache in
//! rank order, skipping what does not fit. Contents are kept for the whole
//! period and nothing changes mid-period.

use std::cmp::Reverse;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Exp};

use crate::model::{ContentIdx, PeriodPlan, PlanEntry};
use crate::money::Money;
use crate::predictor::Predictor;
use crate::workload::substream;

use super::{prediction_requests, ContentOutcome, PeriodContext, Strategy, StrategyError};

pub const FTPL_DOMAIN: u64 = 11;
pub const RANDOM_DOMAIN: u64 = 12;

/// Admits `ranked` in order while capacity lasts; cached contents are
/// retained, others purchased.
fn greedy_fill(ctx: &PeriodContext<'_, '_>, ranked: &[(ContentIdx, bool)]) -> PeriodPlan {
    let catalog = ctx.catalog();
    let mut free = ctx.params.s_max;
    let mut entries = Vec::new();
    for &(idx, cached) in ranked {
        let size = catalog.get(idx).size;
        if size <= free {
            free -= size;
            entries.push(PlanEntry { content: idx, purchase: !cached, prefix_len: ctx.b as u32 });
        }
    }
    PeriodPlan { entries }
}

/// Sorts by descending `score`, ties by ascending content id.
fn rank_by<K: Ord>(ctx: &PeriodContext<'_, '_>, mut score: impl FnMut(ContentIdx) -> K) -> Vec<(ContentIdx, bool)> {
    let catalog = ctx.catalog();
    let mut c: Vec<_> = ctx.candidates().into_iter().map(|(i, cached)| (Reverse(score(i)), catalog.get(i).id, i, cached)).collect();
    c.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    c.into_iter().map(|(_, _, i, cached)| (i, cached)).collect()
}

/// Total-order wrapper for predicted totals.
#[derive(Clone, Copy, Debug)]
struct Score(f64);

impl PartialEq for Score {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Least-frequently-used on predicted requests for the coming period.
pub struct OpLfu<'w> {
    predictor: Box<dyn Predictor + 'w>,
}

impl<'w> OpLfu<'w> {
    pub fn new(predictor: Box<dyn Predictor + 'w>) -> Self {
        OpLfu { predictor }
    }
}

impl Strategy for OpLfu<'_> {
    fn name(&self) -> &str {
        "oplfu"
    }

    fn period_start(&mut self, ctx: &PeriodContext<'_, '_>) -> Result<PeriodPlan, StrategyError> {
        let candidates = ctx.candidates();
        let requests = prediction_requests(
            ctx.snapshot,
            candidates.iter().map(|c| c.0),
            ctx.now,
            ctx.b as usize,
            self.predictor.as_ref(),
        );
        let predictions = self.predictor.predict_batch(&requests)?;
        let totals: HashMap<ContentIdx, f64> =
            candidates.iter().zip(&predictions).map(|(c, p)| (c.0, p.iter().sum())).collect();
        Ok(greedy_fill(ctx, &rank_by(ctx, |i| Score(totals[&i]))))
    }

    fn fallback_events(&self) -> u64 {
        self.predictor.fallback_events()
    }
}

/// Least-frequently-used on requests observed in the last `window` slots.
pub struct WLfu {
    window: u64,
}

impl WLfu {
    pub fn new(window: u64) -> Self {
        WLfu { window }
    }
}

impl Strategy for WLfu {
    fn name(&self) -> &str {
        "wlfu"
    }

    fn period_start(&mut self, ctx: &PeriodContext<'_, '_>) -> Result<PeriodPlan, StrategyError> {
        let ranked = rank_by(ctx, |i| {
            ctx.snapshot.history(i, Some(self.window)).iter().map(|&c| c as u64).sum::<u64>()
        });
        Ok(greedy_fill(ctx, &ranked))
    }
}

/// Freshest first.
pub struct Fifo;

impl Strategy for Fifo {
    fn name(&self) -> &str {
        "fifo"
    }

    fn period_start(&mut self, ctx: &PeriodContext<'_, '_>) -> Result<PeriodPlan, StrategyError> {
        let catalog = ctx.catalog();
        Ok(greedy_fill(ctx, &rank_by(ctx, |i| catalog.get(i).t_gen)))
    }
}

/// Follow the perturbed leader: exponential perturbation per content plus the
/// utility the content has realized so far in this run.
pub struct Ftpl {
    eta: f64,
    seed: u64,
    perturbation: HashMap<ContentIdx, f64>,
    earned: HashMap<ContentIdx, Money>,
}

impl Ftpl {
    pub fn new(eta: f64, seed: u64) -> Self {
        assert!(eta >= 0.0 && eta.is_finite(), "eta must be a non-negative number");
        Ftpl { eta, seed, perturbation: HashMap::new(), earned: HashMap::new() }
    }

    fn score(&mut self, ctx: &PeriodContext<'_, '_>, idx: ContentIdx) -> f64 {
        let (eta, seed) = (self.eta, self.seed);
        let id = ctx.catalog().get(idx).id.0;
        let noise = *self.perturbation.entry(idx).or_insert_with(|| {
            if eta == 0.0 {
                return 0.0;
            }
            let exp = Exp::new(1.0 / eta).expect("positive rate");
            exp.sample(&mut substream(seed, FTPL_DOMAIN, id))
        });
        noise + self.earned.get(&idx).map_or(0.0, |m| m.to_f64())
    }
}

impl Strategy for Ftpl {
    fn name(&self) -> &str {
        "ftpl"
    }

    fn period_start(&mut self, ctx: &PeriodContext<'_, '_>) -> Result<PeriodPlan, StrategyError> {
        let scores: HashMap<ContentIdx, f64> =
            ctx.candidates().into_iter().map(|(i, _)| (i, self.score(ctx, i))).collect();
        Ok(greedy_fill(ctx, &rank_by(ctx, |i| Score(scores[&i]))))
    }

    fn observe(&mut self, _period: u64, outcomes: &[ContentOutcome]) {
        for o in outcomes {
            *self.earned.entry(o.content).or_default() += o.utility;
        }
    }
}

/// Uniformly shuffled candidates, one seeded substream per period.
pub struct Random {
    seed: u64,
}

impl Random {
    pub fn new(seed: u64) -> Self {
        Random { seed }
    }
}

impl Strategy for Random {
    fn name(&self) -> &str {
        "random"
    }

    fn period_start(&mut self, ctx: &PeriodContext<'_, '_>) -> Result<PeriodPlan, StrategyError> {
        let mut order = ctx.candidates();
        let mut rng = substream(self.seed, RANDOM_DOMAIN, ctx.period);
        order.shuffle(&mut rng);
        Ok(greedy_fill(ctx, &order))
    }
}

/// Replays fixed per-period plans, e.g. an offline optimum.
pub struct Scripted {
    name: String,
    periods: Vec<Vec<PlanEntry>>,
}

impl Scripted {
    pub fn new(name: impl Into<String>, periods: Vec<Vec<PlanEntry>>) -> Self {
        Scripted { name: name.into(), periods }
    }
}

impl Strategy for Scripted {
    fn name(&self) -> &str {
        &self.name
    }

    fn period_start(&mut self, ctx: &PeriodContext<'_, '_>) -> Result<PeriodPlan, StrategyError> {
        let entries = self.periods.get(ctx.period as usize).cloned().unwrap_or_default();
        Ok(PeriodPlan { entries })
    }
}
