use crate::money::Money;

use super::RunLog;

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodMetrics {
    pub period: u64,
    pub utility: Money,
    pub served: u64,
    pub requests: u64,
    /// 0 when the period has no requests.
    pub hit_rate: f64,
    /// `None` when nothing was served.
    pub avg_aoi: Option<f64>,
    /// Mean occupied fraction of the capacity.
    pub occupancy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub total_utility: Money,
    pub served: u64,
    pub requests: u64,
    pub hit_rate: f64,
    /// Set when the run saw no requests at all and `hit_rate` is a placeholder.
    pub no_requests: bool,
    pub avg_aoi: Option<f64>,
    pub mean_occupancy: f64,
    pub periods: Vec<PeriodMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn occupancy_fraction(slots: &[u64], s_max: u64) -> f64 {
    if slots.is_empty() || s_max == 0 {
        return 0.0;
    }
    slots.iter().sum::<u64>() as f64 / (slots.len() as f64 * s_max as f64)
}

pub fn compute_metrics(log: &RunLog) -> Metrics {
    let b = log.config.clock.b() as usize;
    let s_max = log.config.params.s_max;
    let mut periods = Vec::with_capacity(log.period_requests.len());
    let (mut served, mut aoi_sum) = (0u64, 0u64);
    for (l, &requests) in log.period_requests.iter().enumerate() {
        let (mut p_served, mut p_aoi, mut utility) = (0, 0, Money::ZERO);
        for r in log.period_rows(l as u64) {
            p_served += r.served;
            p_aoi += r.aoi_sum;
            utility += r.utility;
        }
        served += p_served;
        aoi_sum += p_aoi;
        let slots = &log.occupancy[(l * b).min(log.occupancy.len())..((l + 1) * b).min(log.occupancy.len())];
        periods.push(PeriodMetrics {
            period: l as u64,
            utility,
            served: p_served,
            requests,
            hit_rate: ratio(p_served, requests),
            avg_aoi: (p_served > 0).then(|| ratio(p_aoi, p_served)),
            occupancy: occupancy_fraction(slots, s_max),
        });
    }
    let requests: u64 = log.period_requests.iter().sum();
    Metrics {
        total_utility: log.total_utility,
        served,
        requests,
        hit_rate: ratio(served, requests),
        no_requests: requests == 0,
        avg_aoi: (served > 0).then(|| ratio(aoi_sum, served)),
        mean_occupancy: occupancy_fraction(&log.occupancy, s_max),
        periods,
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{params, workload};
    use super::super::*;
    use crate::model::PlanEntry;
    use crate::strategies::{Fifo, Scripted};

    fn cfg(b: u64, periods: u64, s_max: u64) -> EngineConfig {
        EngineConfig {
            clock: SimClock::new(b, periods).unwrap(),
            params: params(s_max),
            schedule: UpdateSchedule::new(1).unwrap(),
        }
    }

    #[test]
    fn three_of_four_requests_served() {
        // Content 0 cached at slots 2..4 gets 1 + 2 requests; content 1 is never
        // cached and gets 1 request at slot 3.
        let w = workload(&[(0, 2, 1), (1, 50, 1)], &[vec![0, 1, 2], vec![0, 1]]);
        let plan = vec![vec![], vec![PlanEntry { content: ContentIdx(0), purchase: true, prefix_len: 2 }]];
        let log = run_simulation(&w, &cfg(2, 2, 10), &mut Scripted::new("s", plan)).unwrap();
        let m = compute_metrics(&log);
        assert_eq!((m.served, m.requests), (3, 4));
        assert_eq!(m.hit_rate, 0.75);
        // Delivery AoI 3 for the request at slot 2, 4 for the two at slot 3.
        assert_eq!(m.avg_aoi, Some(11.0 / 3.0));
        assert_eq!(m.periods[1].occupancy, 0.2);
        assert_eq!(m.mean_occupancy, 0.1);
        assert_eq!(m.periods[0].hit_rate, 0.0);
    }

    #[test]
    fn all_served_and_nothing_cached() {
        let w = workload(&[(0, 2, 1)], &[vec![0, 4, 4]]);
        let plan = vec![vec![], vec![PlanEntry { content: ContentIdx(0), purchase: true, prefix_len: 2 }]];
        let m = compute_metrics(&run_simulation(&w, &cfg(2, 2, 10), &mut Scripted::new("s", plan)).unwrap());
        assert_eq!(m.hit_rate, 1.0);
        assert!(m.avg_aoi.unwrap() >= 1.0);

        let m = compute_metrics(&run_simulation(&w, &cfg(2, 2, 1), &mut Fifo).unwrap());
        assert_eq!((m.hit_rate, m.total_utility, m.avg_aoi), (0.0, Money::ZERO, None));
        assert!(!m.no_requests);

        let empty = workload(&[(0, 2, 1)], &[vec![]]);
        let m = compute_metrics(&run_simulation(&empty, &cfg(2, 2, 1), &mut Fifo).unwrap());
        assert!(m.no_requests);
        assert_eq!(m.hit_rate, 0.0);
    }
}
