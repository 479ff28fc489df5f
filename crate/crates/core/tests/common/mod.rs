#![allow(dead_code)]

use aoicache::config::{self, RunConfig};
use aoicache::dt::UpdateSchedule;
use aoicache::engine::{EngineConfig, RunLog};
use aoicache::model::{realized_utility, Catalog, ContentCatalogEntry, ContentId, EconomicParams, SimClock};
use aoicache::money::Money;
use aoicache::workload::{RequestTrace, TraceRow, Workload};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Tiny {
    pub workload: Workload,
    pub config: EngineConfig,
}

/// Random instance inside the brute-force limits. With `single_period`, all
/// contents appear during period 0 (where nothing is purchasable yet), so
/// period 1 is the only decision.
pub fn tiny_instance(seed: u64, single_period: bool) -> Tiny {
    tiny_instance_with(seed, single_period, false)
}

/// As [`tiny_instance`]; with `default_economics` the market parameters are
/// the preset ones (lambda 1, C_d 1, C_a 0.1, phi 30) instead of random.
pub fn tiny_instance_with(seed: u64, single_period: bool, default_economics: bool) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = rng.random_range(1..=4u64);
    let periods = if single_period { 2 } else { rng.random_range(2..=3u64) };
    let end = b * periods;
    let n = rng.random_range(1..=8usize);
    let gen_hi = if single_period { b } else { end - 1 };
    let entries: Vec<ContentCatalogEntry> = (0..n)
        .map(|i| ContentCatalogEntry {
            id: ContentId(i as u64),
            t_gen: rng.random_range(0..gen_hi.max(1)),
            size: rng.random_range(1..=6),
            price: Money::from_units(rng.random_range(0..=30)),
            fee_ceiling: Money::from_units(30),
        })
        .collect();
    let catalog = Catalog::new(entries).unwrap();
    let zero_p = rng.random_range(0.0..0.4);
    let rows = catalog
        .entries()
        .iter()
        .map(|e| {
            let counts = (e.t_gen + 1..end)
                .map(|_| if rng.random_bool(zero_p) { 0 } else { rng.random_range(1..=8) })
                .collect();
            TraceRow { start: e.t_gen + 1, counts }
        })
        .collect();
    let lambdas = ["0", "0.5", "1", "2", "4"];
    let mut params = EconomicParams {
        lambda: lambdas[rng.random_range(0..lambdas.len())].parse().unwrap(),
        c_d: Money::from_units(rng.random_range(0..=2)),
        c_a: Money::from_micros(rng.random_range(0..=500_000)),
        phi: rng.random_range(1..=end + 2),
        s_max: rng.random_range(3..=15),
    };
    if default_economics {
        params = EconomicParams { lambda: Money::from_units(1), c_d: Money::from_units(1), c_a: Money::from_micros(100_000), phi: 30, ..params };
    }
    Tiny {
        workload: Workload::new(catalog, RequestTrace::from_rows(rows)),
        config: EngineConfig {
            clock: SimClock::new(b, periods).unwrap(),
            params,
            schedule: UpdateSchedule::new(1).unwrap(),
        },
    }
}

/// Desk-scale (small preset) config with the given workload seed and extra
/// overrides.
pub fn desk_config(seed: u64, extra: &[(&str, &str)]) -> (config::Flat, RunConfig) {
    let mut o = vec![("workload.seed".to_string(), seed.to_string())];
    o.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    let flat = config::load(None, &o).unwrap();
    let cfg = RunConfig::from_flat(&flat).unwrap();
    (flat, cfg)
}

/// Recomputes every row from the trace and the model arithmetic. Returns a
/// description of the first mismatch.
pub fn double_entry(w: &Workload, log: &RunLog) -> Result<(), String> {
    let clock = log.config.clock;
    let mut total = Money::ZERO;
    for r in &log.rows {
        let slots = clock.period_slots(r.period);
        let actual = w.trace.window(r.content, slots.start, slots.end);
        let e = w.catalog.get(r.content);
        let u = realized_utility(e, r.purchase, r.prefix_len, r.fee, &actual, &log.config.params);
        if u != r.utility {
            return Err(format!("{} period {} content {}: logged {} recomputed {u}", log.meta.strategy, r.period, r.id, r.utility));
        }
        let served: u64 = actual.iter().take(r.prefix_len as usize).map(|&c| c as u64).sum();
        if served != r.served {
            return Err(format!("{} period {} content {}: served {} vs {served}", log.meta.strategy, r.period, r.id, r.served));
        }
        total += u;
    }
    if total != log.total_utility {
        return Err(format!("{}: total {} vs row sum {total}", log.meta.strategy, log.total_utility));
    }
    Ok(())
}

/// Slots whose occupancy exceeds the capacity.
pub fn capacity_violations(log: &RunLog) -> usize {
    log.occupancy.iter().filter(|&&o| o > log.config.params.s_max).count()
}
