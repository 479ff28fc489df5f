use crate::model::{ContentCatalogEntry, EconomicParams};
use crate::money::Money;

use super::OptimizerError;

/// Per-content economics for one period: what a served request earns and
/// what a cached slot costs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContentTerms {
    /// `fee + size * c_d`.
    pub margin: Money,
    /// `size * c_a`.
    pub slot_cost: Money,
}

impl ContentTerms {
    pub fn new(entry: &ContentCatalogEntry, fee: Money, params: &EconomicParams) -> Self {
        ContentTerms {
            margin: entry.request_margin(fee, params),
            slot_cost: entry.slot_cost(params),
        }
    }

    /// Net value of one cached slot with `requests` expected requests.
    pub fn slot_gain(&self, requests: f64) -> Money {
        self.margin.scale(requests) - self.slot_cost
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrefixEvaluation {
    pub best_utility: Money,
    pub best_prefix_len: u32,
}

fn argmax_prefix(gains: impl Iterator<Item = Money>, base: Money, min_k: u32) -> PrefixEvaluation {
    let mut acc = base;
    let mut best = (min_k == 0).then_some(PrefixEvaluation { best_utility: base, best_prefix_len: 0 });
    for (i, g) in gains.enumerate() {
        acc += g;
        let k = i as u32 + 1;
        // `>=` keeps the larger k on ties.
        if k >= min_k && best.is_none_or(|b| acc >= b.best_utility) {
            best = Some(PrefixEvaluation { best_utility: acc, best_prefix_len: k });
        }
    }
    best.expect("horizon checked non-empty")
}

/// Best caching prefix for a content cached at the period's first slot.
///
/// Maximizes `sum_{d<k} (predicted[d] * margin - slot_cost) - purchase_cost`
/// over `k` in `1..=b`, preferring the larger `k` on ties. The result may be
/// negative; excluding the content is the knapsack's call.
pub fn best_prefix_utility(
    predicted: &[f64],
    b: usize,
    terms: &ContentTerms,
    purchase_cost: Money,
) -> Result<PrefixEvaluation, OptimizerError> {
    if predicted.len() != b || b == 0 {
        return Err(OptimizerError::HorizonLength { expected: b, got: predicted.len() });
    }
    Ok(argmax_prefix(
        predicted.iter().map(|&r| terms.slot_gain(r)),
        -purchase_cost,
        1,
    ))
}

/// Best continuation for a content already cached, over the remaining slots
/// of the period. `k = 0` releases immediately.
pub fn best_remaining_prefix(
    predicted: &[f64],
    terms: &ContentTerms,
) -> Result<PrefixEvaluation, OptimizerError> {
    if predicted.is_empty() {
        return Err(OptimizerError::EmptyHorizon);
    }
    Ok(argmax_prefix(predicted.iter().map(|&r| terms.slot_gain(r)), Money::ZERO, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(fee: i64, size: u64, c_d: &str, c_a: &str) -> ContentTerms {
        let c_d: Money = c_d.parse().unwrap();
        let c_a: Money = c_a.parse().unwrap();
        ContentTerms { margin: Money::from_units(fee) + c_d.times(size), slot_cost: c_a.times(size) }
    }

    /// Independent enumeration over every k.
    fn enumerate(pred: &[f64], t: &ContentTerms, base: Money, min_k: u32) -> PrefixEvaluation {
        let mut best: Option<PrefixEvaluation> = None;
        for k in min_k..=pred.len() as u32 {
            let u = base
                + (0..k as usize)
                    .map(|d| t.margin.scale(pred[d]) - t.slot_cost)
                    .sum::<Money>();
            if best.is_none_or(|b| u >= b.best_utility) {
                best = Some(PrefixEvaluation { best_utility: u, best_prefix_len: k });
            }
        }
        best.unwrap()
    }

    #[test]
    fn purchased_case_example() {
        let t = terms(10, 2, "1", "0.1");
        let pred = [4.0, 2.0, 0.0];
        let e = best_prefix_utility(&pred, 3, &t, Money::from_units(22)).unwrap();
        assert_eq!(e.best_utility, "49.6".parse().unwrap());
        assert_eq!(e.best_prefix_len, 2);
        // u(1) = 48 - 0.2 - 22 and u(3) = 72 - 0.6 - 22.
        assert_eq!(
            enumerate(&pred[..1], &t, Money::from_units(-22), 1).best_utility,
            "25.8".parse().unwrap()
        );
        let u3 = (0..3).map(|d| t.slot_gain(pred[d])).sum::<Money>() - Money::from_units(22);
        assert_eq!(u3, "49.4".parse().unwrap());
    }

    #[test]
    fn all_zero_prediction_keeps_minimum_slot() {
        let t = terms(10, 2, "1", "0.1");
        let e = best_prefix_utility(&[0.0; 5], 5, &t, Money::ZERO).unwrap();
        assert_eq!(e, PrefixEvaluation { best_utility: "-0.2".parse().unwrap(), best_prefix_len: 1 });
    }

    #[test]
    fn non_negative_margins_run_to_end() {
        let t = terms(10, 2, "1", "0.1");
        let e = best_prefix_utility(&[1.0, 0.5, 3.0, 0.1], 4, &t, Money::from_units(3)).unwrap();
        assert_eq!(e.best_prefix_len, 4);
    }

    #[test]
    fn horizon_must_match() {
        let t = terms(1, 1, "1", "0");
        assert_eq!(
            best_prefix_utility(&[1.0], 2, &t, Money::ZERO),
            Err(OptimizerError::HorizonLength { expected: 2, got: 1 })
        );
        assert_eq!(best_remaining_prefix(&[], &t), Err(OptimizerError::EmptyHorizon));
    }

    #[test]
    fn remaining_examples() {
        let t = terms(10, 2, "1", "0.1");
        let e = best_remaining_prefix(&[0.0, 0.0], &t).unwrap();
        assert_eq!(e, PrefixEvaluation { best_utility: Money::ZERO, best_prefix_len: 0 });
        let e = best_remaining_prefix(&[5.0], &t).unwrap();
        assert_eq!(e.best_prefix_len, 1);
        assert_eq!(e.best_utility, t.slot_gain(5.0));
        // margin 1 per request, 0.2 per slot: u = 0, 2.8, 2.6, 6.4
        let t = ContentTerms { margin: Money::from_units(1), slot_cost: "0.2".parse().unwrap() };
        let e = best_remaining_prefix(&[3.0, 0.0, 4.0], &t).unwrap();
        assert_eq!(e, PrefixEvaluation { best_utility: "6.4".parse().unwrap(), best_prefix_len: 3 });
    }

    #[test]
    fn ties_prefer_longer_prefix() {
        let t = ContentTerms { margin: Money::from_units(1), slot_cost: Money::from_units(1) };
        // Every slot nets exactly zero.
        let e = best_prefix_utility(&[1.0, 1.0, 1.0], 3, &t, Money::ZERO).unwrap();
        assert_eq!(e.best_prefix_len, 3);
        let e = best_remaining_prefix(&[1.0, 1.0], &t).unwrap();
        assert_eq!(e.best_prefix_len, 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn horizon() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(prop_oneof![(0u32..30).prop_map(f64::from), 0.0..25.0f64], 1..=12)
        }

        proptest! {
            #[test]
            fn matches_enumeration(pred in horizon(), fee in -40i64..80, size in 1u64..50, cost in 0i64..300) {
                let t = terms(fee, size, "1", "0.1");
                let purchase = Money::from_units(cost);
                let got = best_prefix_utility(&pred, pred.len(), &t, purchase).unwrap();
                prop_assert_eq!(got, enumerate(&pred, &t, -purchase, 1));
                let rem = best_remaining_prefix(&pred, &t).unwrap();
                prop_assert_eq!(rem, enumerate(&pred, &t, Money::ZERO, 0));
                prop_assert!(!rem.best_utility.is_negative());
            }

            #[test]
            fn purchase_cost_shifts_without_reordering(pred in horizon(), fee in -40i64..80, cost in 0i64..300) {
                let t = terms(fee, 7, "1", "0.1");
                let c = Money::from_units(cost);
                let free = best_prefix_utility(&pred, pred.len(), &t, Money::ZERO).unwrap();
                let paid = best_prefix_utility(&pred, pred.len(), &t, c).unwrap();
                prop_assert_eq!(free.best_utility, paid.best_utility + c);
                prop_assert_eq!(free.best_prefix_len, paid.best_prefix_len);
            }
        }
    }
}
