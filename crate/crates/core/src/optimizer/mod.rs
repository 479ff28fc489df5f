//! Per-content prefix evaluation, the period-level knapsack and the tiny-instance
//! offline optimum.

mod knapsack;
mod offline;
mod prefix;

use thiserror::Error;

pub use knapsack::{knapsack_01, knapsack_bruteforce, KnapsackItem, KnapsackSolution, BRUTEFORCE_MAX_ITEMS};
pub use offline::{offline_optimal_bruteforce, OfflineSolution};
pub use prefix::{best_prefix_utility, best_remaining_prefix, ContentTerms, PrefixEvaluation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OptimizerError {
    #[error("prediction horizon has length {got}, expected {expected}")]
    HorizonLength { expected: usize, got: usize },
    #[error("empty prediction horizon")]
    EmptyHorizon,
    #[error("{got} items exceed the brute-force limit of {max}")]
    TooManyItems { got: usize, max: usize },
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
}
