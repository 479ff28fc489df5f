//! Exact multi-period optimum for tiny instances.
//!
//! Contents interact only through the per-period capacity check on which
//! contents are cached at each period's first slot. So the search splits in
//! two: for every content and every selection pattern (the set of periods in
//! which it is cached at the first slot) enumerate all prefix-length sequences
//! to get that pattern's best utility; then enumerate pattern assignments
//! across contents under the capacity constraint. Both levels are exhaustive.

use crate::model::{
    aoi, realized_utility, service_fee, EconomicParams, PlanEntry, ServedStats, SimClock,
};
use crate::money::Money;
use crate::workload::Workload;
use crate::model::ContentIdx;

use super::OptimizerError;

pub const MAX_CONTENTS: usize = 8;
pub const MAX_PERIODS: u64 = 3;
pub const MAX_B: u64 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OfflineSolution {
    pub total: Money,
    /// Plan per period, entries in content-index order.
    pub periods: Vec<Vec<PlanEntry>>,
}

#[derive(Clone, Debug)]
struct PatternChoice {
    mask: u32,
    value: Money,
    /// Prefix length per period; 0 when not selected.
    prefixes: Vec<u32>,
}

/// Best utility of one content for each selection pattern; `None` when no
/// feasible prefix sequence realizes the pattern.
fn content_patterns(
    w: &Workload,
    idx: ContentIdx,
    clock: &SimClock,
    params: &EconomicParams,
) -> Vec<PatternChoice> {
    let entry = w.catalog.get(idx);
    let (b, periods) = (clock.b(), clock.periods() as usize);
    let actual: Vec<Vec<u32>> = (0..periods as u64)
        .map(|l| {
            let s = clock.period_start(l);
            w.trace.window(idx, s, s + b)
        })
        .collect();
    let purchasable: Vec<bool> = (0..periods as u64)
        .map(|l| {
            let a = aoi(clock.period_start(l), entry.t_gen);
            a > 0 && a <= params.phi
        })
        .collect();

    let mut out = Vec::new();
    for mask in 0u32..(1 << periods) {
        let selected: Vec<usize> = (0..periods).filter(|&l| mask & (1 << l) != 0).collect();
        let combos = (b as usize).pow(selected.len() as u32);
        let mut best: Option<PatternChoice> = None;
        for code in 0..combos {
            let mut prefixes = vec![0u32; periods];
            let mut c = code;
            for &l in &selected {
                prefixes[l] = (c % b as usize) as u32 + 1;
                c /= b as usize;
            }
            let mut total = Money::ZERO;
            let mut prev = ServedStats::default();
            let mut feasible = true;
            for l in 0..periods {
                let k = prefixes[l];
                if k == 0 {
                    prev = ServedStats::default();
                    continue;
                }
                let carry = l > 0 && prefixes[l - 1] as u64 == b;
                if !carry && !purchasable[l] {
                    feasible = false;
                    break;
                }
                let start = clock.period_start(l as u64);
                let fee = service_fee(entry, prev.average(), aoi(start, entry.t_gen), params);
                total += realized_utility(entry, !carry, k, fee, &actual[l], params);
                let mut stats = ServedStats::default();
                for (d, &r) in actual[l].iter().take(k as usize).enumerate() {
                    stats.record(r as u64, aoi(start + d as u64 + 1, entry.t_gen));
                }
                prev = stats;
            }
            if feasible && best.as_ref().is_none_or(|p| total > p.value) {
                best = Some(PatternChoice { mask, value: total, prefixes });
            }
        }
        if let Some(p) = best {
            out.push(p);
        }
    }
    out
}

struct Search<'a> {
    choices: &'a [Vec<PatternChoice>],
    sizes: &'a [u64],
    suffix_bound: Vec<Money>,
    s_max: u64,
    best: Money,
    best_pick: Vec<usize>,
    pick: Vec<usize>,
    load: Vec<u64>,
}

impl Search<'_> {
    fn dfs(&mut self, i: usize, acc: Money) {
        if i == self.choices.len() {
            if acc > self.best {
                self.best = acc;
                self.best_pick = self.pick.clone();
            }
            return;
        }
        if acc + self.suffix_bound[i] <= self.best {
            return;
        }
        for (j, choice) in self.choices[i].iter().enumerate() {
            let fits = (0..self.load.len())
                .all(|l| choice.mask & (1 << l) == 0 || self.load[l] + self.sizes[i] <= self.s_max);
            if !fits {
                continue;
            }
            for l in 0..self.load.len() {
                if choice.mask & (1 << l) != 0 {
                    self.load[l] += self.sizes[i];
                }
            }
            self.pick[i] = j;
            self.dfs(i + 1, acc + choice.value);
            for l in 0..self.load.len() {
                if choice.mask & (1 << l) != 0 {
                    self.load[l] -= self.sizes[i];
                }
            }
        }
    }
}

/// Maximum total utility over every feasible joint schedule, using the true
/// requests. Only tiny instances are accepted.
pub fn offline_optimal_bruteforce(
    w: &Workload,
    clock: &SimClock,
    params: &EconomicParams,
) -> Result<OfflineSolution, OptimizerError> {
    if w.catalog.len() > MAX_CONTENTS || clock.periods() > MAX_PERIODS || clock.b() > MAX_B {
        return Err(OptimizerError::InstanceTooLarge(format!(
            "{} contents, {} periods, b={} (limits {MAX_CONTENTS}, {MAX_PERIODS}, {MAX_B})",
            w.catalog.len(),
            clock.periods(),
            clock.b()
        )));
    }
    let choices: Vec<Vec<PatternChoice>> = w
        .catalog
        .indices()
        .map(|i| content_patterns(w, i, clock, params))
        .collect();
    let sizes: Vec<u64> = w.catalog.entries().iter().map(|e| e.size).collect();
    let mut suffix_bound = vec![Money::ZERO; choices.len() + 1];
    for i in (0..choices.len()).rev() {
        let top = choices[i].iter().map(|c| c.value).max().unwrap_or(Money::ZERO);
        suffix_bound[i] = suffix_bound[i + 1] + top.max(Money::ZERO);
    }
    // The empty pattern is always feasible, so the all-empty pick seeds the search.
    let empty_pick: Vec<usize> = choices
        .iter()
        .map(|c| c.iter().position(|p| p.mask == 0).expect("empty pattern"))
        .collect();
    let mut search = Search {
        choices: &choices,
        sizes: &sizes,
        suffix_bound,
        s_max: params.s_max,
        best: Money::ZERO,
        best_pick: empty_pick.clone(),
        pick: empty_pick,
        load: vec![0; clock.periods() as usize],
    };
    search.dfs(0, Money::ZERO);

    let mut periods = vec![Vec::new(); clock.periods() as usize];
    for (i, &j) in search.best_pick.iter().enumerate() {
        let p = &choices[i][j].prefixes;
        for l in 0..periods.len() {
            if p[l] > 0 {
                let carry = l > 0 && p[l - 1] as u64 == clock.b();
                periods[l].push(PlanEntry {
                    content: ContentIdx(i as u32),
                    purchase: !carry,
                    prefix_len: p[l],
                });
            }
        }
    }
    Ok(OfflineSolution { total: search.best, periods })
}
