use std::fmt;

use thiserror::Error;

use crate::money::Money;
use crate::optimizer::{offline_optimal_bruteforce, OfflineSolution, OptimizerError};
use crate::strategies::{Scripted, Strategy};
use crate::workload::Workload;

use super::{run_simulation, EngineConfig, EngineError, RunLog};

/// Competitive-ratio bound `1 + 1/(alpha*R - beta - 1)` and its ingredients,
/// taken over the cached content-periods of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    /// Minimum profit ratio `(fee + s*C_d) / (p + s*C_d)`.
    pub alpha: f64,
    /// Minimum served requests of a cached content in one period.
    pub r: u64,
    /// Maximum cost ratio `b*s*C_a / (p + s*C_d)`.
    pub beta: f64,
    /// `None` when `alpha*R - beta - 1 <= 0`.
    pub value: Option<f64>,
}

impl BoundReport {
    pub fn from_components(alpha: f64, r: u64, beta: f64) -> Self {
        let den = alpha * r as f64 - beta - 1.0;
        let value = (den > 0.0 && den.is_finite()).then(|| 1.0 + 1.0 / den);
        BoundReport { alpha, r, beta, value }
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha={:.6} R={} beta={:.6} bound=", self.alpha, self.r, self.beta)?;
        match self.value {
            Some(v) => write!(f, "{v:.6}"),
            None => f.write_str("undefined"),
        }
    }
}

fn quotient(num: Money, den: Money) -> f64 {
    if den == Money::ZERO {
        if num == Money::ZERO {
            0.0
        } else {
            f64::INFINITY.copysign(num.to_f64())
        }
    } else {
        num.micros() as f64 / den.micros() as f64
    }
}

/// `None` when the run cached nothing.
pub fn cr_bound(log: &RunLog) -> Option<BoundReport> {
    let p = &log.config.params;
    let b = log.config.clock.b();
    let mut cached = log.rows.iter().filter(|r| r.prefix_len >= 1).peekable();
    cached.peek()?;
    let (mut alpha, mut r_min, mut beta) = (f64::INFINITY, u64::MAX, f64::NEG_INFINITY);
    for row in cached {
        let transfer = p.c_d.times(row.size);
        let cost = row.price + transfer;
        alpha = alpha.min(quotient(row.fee + transfer, cost));
        beta = beta.max(quotient(p.c_a.times(row.size * b), cost));
        r_min = r_min.min(row.served);
    }
    Some(BoundReport::from_components(alpha, r_min, beta))
}

/// Offline optimum over online utility.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EmpiricalCr {
    Ratio(f64),
    /// The online utility is not positive.
    NotComparable,
}

#[derive(Debug, Error)]
pub enum CrError {
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Solves the tiny instance exactly and replays the optimum through the
/// engine, so the result carries a full run record.
pub fn offline_replay(w: &Workload, cfg: &EngineConfig) -> Result<(OfflineSolution, RunLog), CrError> {
    let sol = offline_optimal_bruteforce(w, &cfg.clock, &cfg.params)?;
    let log = run_simulation(w, cfg, &mut Scripted::new("offline-optimal", sol.periods.clone()))?;
    Ok((sol, log))
}

pub fn cr_ratio(optimum: Money, online: Money) -> EmpiricalCr {
    if online.is_positive() {
        EmpiricalCr::Ratio(optimum.micros() as f64 / online.micros() as f64)
    } else {
        EmpiricalCr::NotComparable
    }
}

/// Runs `strategy` on a tiny instance and compares it with the offline optimum.
pub fn empirical_cr(w: &Workload, cfg: &EngineConfig, strategy: &mut dyn Strategy) -> Result<EmpiricalCr, CrError> {
    let opt = offline_optimal_bruteforce(w, &cfg.clock, &cfg.params)?;
    let log = run_simulation(w, cfg, strategy)?;
    Ok(cr_ratio(opt.total, log.total_utility))
}

#[cfg(test)]
mod tests {
    use super::super::tests::{params, workload};
    use super::*;
    use crate::dt::UpdateSchedule;
    use crate::model::{ContentIdx, PlanEntry, SimClock};
    use crate::strategies::{DtOca, Fifo};

    #[test]
    fn bound_examples() {
        let r = BoundReport::from_components(2.0, 10, 1.0);
        assert!((r.value.unwrap() - (1.0 + 1.0 / 18.0)).abs() < 1e-12);
        assert_eq!(BoundReport::from_components(1.0, 2, 1.0).value, None);
        assert_eq!(BoundReport::from_components(0.5, 2, 1.0).value, None);
        assert!(BoundReport::from_components(1.0, 2, 1.0).to_string().ends_with("bound=undefined"));
    }

    fn cfg(b: u64, periods: u64, s_max: u64) -> EngineConfig {
        EngineConfig {
            clock: SimClock::new(b, periods).unwrap(),
            params: params(s_max),
            schedule: UpdateSchedule::new(1).unwrap(),
        }
    }

    #[test]
    fn bound_components_from_a_run() {
        // Fee 28 at period 1 (aoi 2), size 2, price 10: alpha = 30/12, beta = 2*2*0.1/12.
        let w = workload(&[(0, 2, 10)], &[vec![0, 5, 7]]);
        let plan = vec![vec![], vec![PlanEntry { content: ContentIdx(0), purchase: true, prefix_len: 2 }]];
        let log = run_simulation(&w, &cfg(2, 2, 10), &mut Scripted::new("s", plan)).unwrap();
        let rep = cr_bound(&log).unwrap();
        assert_eq!(rep.r, 12);
        assert!((rep.alpha - 2.5).abs() < 1e-12);
        assert!((rep.beta - 0.4 / 12.0).abs() < 1e-12);
        assert!(rep.value.unwrap() > 1.0);

        let empty = run_simulation(&w, &cfg(2, 2, 1), &mut Fifo).unwrap();
        assert_eq!(cr_bound(&empty), None);
    }

    #[test]
    fn perfect_prediction_is_optimal_when_periods_decouple() {
        let w = workload(&[(0, 3, 10), (1, 4, 12), (0, 5, 3)], &[vec![0, 0, 4, 6, 1], vec![0, 3, 3, 3], vec![0, 0, 1, 0]]);
        let c = cfg(3, 2, 8);
        let mut pp = DtOca::perfect(&w.trace, c.clock.total_slots());
        assert_eq!(empirical_cr(&w, &c, &mut pp).unwrap(), EmpiricalCr::Ratio(1.0));
        let (sol, log) = offline_replay(&w, &c).unwrap();
        assert_eq!(sol.total, log.total_utility);
    }

    #[test]
    fn bound_fails_once_a_content_outlives_phi() {
        // At slot 4 the content is past phi: only carrying it over keeps it.
        let w = workload(&[(0, 2, 1)], &[vec![6, 4, 0, 0, 8]]);
        let mut c = cfg(2, 3, 8);
        c.params.phi = 3;
        c.params.lambda = Money::ZERO;
        let (sol, opt_log) = offline_replay(&w, &c).unwrap();
        let pp = run_simulation(&w, &c, &mut DtOca::perfect(&w.trace, 6)).unwrap();
        let EmpiricalCr::Ratio(ratio) = cr_ratio(sol.total, pp.total_utility) else { panic!() };
        let bound = cr_bound(&opt_log).unwrap().value.unwrap();
        assert!(ratio > 2.0 && bound < 1.1, "ratio {ratio} bound {bound}");
    }

    #[test]
    fn non_positive_utility_is_not_comparable() {
        let w = workload(&[(0, 2, 10)], &[vec![]]);
        let c = cfg(2, 2, 10);
        assert_eq!(empirical_cr(&w, &c, &mut Fifo).unwrap(), EmpiricalCr::NotComparable);
        assert_eq!(cr_ratio(Money::from_units(3), Money::from_units(-1)), EmpiricalCr::NotComparable);
    }

    #[test]
    fn fifo_on_inverted_popularity_is_worse_than_perfect_prediction() {
        // The freshest content is cold, the older one is hot; room for one.
        let w = workload(&[(0, 4, 5), (2, 4, 5)], &[vec![0, 0, 9, 9, 9, 9, 9], vec![0, 0, 0, 0, 0]]);
        let c = cfg(3, 3, 4);
        let mut pp = DtOca::perfect(&w.trace, c.clock.total_slots());
        let pp_cr = empirical_cr(&w, &c, &mut pp).unwrap();
        let fifo_cr = empirical_cr(&w, &c, &mut Fifo).unwrap();
        assert_eq!(pp_cr, EmpiricalCr::Ratio(1.0));
        match fifo_cr {
            EmpiricalCr::Ratio(r) => assert!(r > 1.0),
            EmpiricalCr::NotComparable => {}
        }
    }
}
