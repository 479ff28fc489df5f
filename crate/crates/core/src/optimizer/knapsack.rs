use std::cmp::Ordering;

use crate::money::Money;

use super::OptimizerError;

/// Largest instance the exhaustive oracle accepts.
pub const BRUTEFORCE_MAX_ITEMS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KnapsackItem {
    pub id: u64,
    /// May be negative; such items are never selected.
    pub value: Money,
    pub weight: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnapsackSolution {
    pub total: Money,
    /// Selected ids, ascending.
    pub selected: Vec<u64>,
}

/// Exact 0-1 knapsack by dynamic programming over integer weights.
///
/// Among optimal selections the one with the smallest total weight wins, then
/// the lexicographically smallest ascending id sequence.
pub fn knapsack_01(items: &[KnapsackItem], capacity: u64) -> KnapsackSolution {
    let mut cands: Vec<KnapsackItem> = items
        .iter()
        .copied()
        .filter(|it| it.value.is_positive() && it.weight <= capacity)
        .collect();
    cands.sort_by_key(|it| it.id);
    if cands.is_empty() {
        return KnapsackSolution::default();
    }
    let cap = capacity.min(cands.iter().map(|it| it.weight).sum()) as usize;
    let n = cands.len();
    let width = cap + 1;
    // best[i][w]: max value from items i.. with total weight <= w.
    let mut best = vec![0i64; (n + 1) * width];
    for i in (0..n).rev() {
        let (w_i, v_i) = (cands[i].weight as usize, cands[i].value.micros());
        let (head, tail) = best.split_at_mut((i + 1) * width);
        let row = &mut head[i * width..];
        let next = &tail[..width];
        for w in 0..width {
            let skip = next[w];
            row[w] = if w >= w_i { skip.max(next[w - w_i] + v_i) } else { skip };
        }
    }
    let total = best[cap];
    // Smallest weight that still reaches the optimum.
    let mut w_left = (0..width).find(|&w| best[w] == total).expect("row is monotone");
    let mut v_left = total;
    let mut selected = Vec::new();
    for (i, it) in cands.iter().enumerate() {
        let (w_i, v_i) = (it.weight as usize, it.value.micros());
        // Taking the smallest remaining id whenever an optimal completion
        // exists yields the lexicographically smallest selection.
        if w_i <= w_left && best[(i + 1) * width + (w_left - w_i)] >= v_left - v_i {
            selected.push(it.id);
            w_left -= w_i;
            v_left -= v_i;
        }
    }
    debug_assert_eq!(v_left, 0);
    KnapsackSolution { total: Money::from_micros(total), selected }
}

fn lex_cmp(a: &[u64], b: &[u64]) -> Ordering {
    a.cmp(b)
}

/// Exhaustive subset search with the same tie-breaking as [`knapsack_01`].
pub fn knapsack_bruteforce(
    items: &[KnapsackItem],
    capacity: u64,
) -> Result<KnapsackSolution, OptimizerError> {
    if items.len() > BRUTEFORCE_MAX_ITEMS {
        return Err(OptimizerError::TooManyItems { got: items.len(), max: BRUTEFORCE_MAX_ITEMS });
    }
    let mut sorted = items.to_vec();
    sorted.sort_by_key(|it| it.id);
    let n = sorted.len();
    let ids_of = |mask: u32| -> Vec<u64> {
        (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| sorted[i].id).collect()
    };
    // Gray-code walk: one item flips per step. Subsets holding a non-positive
    // item are skipped, matching the DP, which never selects one.
    let (mut value, mut weight, mut mask, mut non_positive) = (0i64, 0u64, 0u32, 0usize);
    let (mut best_v, mut best_w, mut best_mask) = (0i64, 0u64, 0u32);
    for step in 1u32..(1u32 << n) {
        let bit = step.trailing_zeros() as usize;
        mask ^= 1 << bit;
        let it = &sorted[bit];
        if mask & (1 << bit) != 0 {
            value += it.value.micros();
            weight += it.weight;
            non_positive += usize::from(!it.value.is_positive());
        } else {
            value -= it.value.micros();
            weight -= it.weight;
            non_positive -= usize::from(!it.value.is_positive());
        }
        if weight > capacity || non_positive > 0 {
            continue;
        }
        let better = match value.cmp(&best_v) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => match weight.cmp(&best_w) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => lex_cmp(&ids_of(mask), &ids_of(best_mask)) == Ordering::Less,
            },
        };
        if better {
            (best_v, best_w, best_mask) = (value, weight, mask);
        }
    }
    Ok(KnapsackSolution { total: Money::from_micros(best_v), selected: ids_of(best_mask) })
}
