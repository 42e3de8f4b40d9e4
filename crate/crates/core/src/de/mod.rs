//! Differential-evolution operators and their self-adaptation.

mod adaptation;
mod memory;
mod mutation;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use adaptation::{StrategyStats, DEFAULT_LEARNING_PERIOD};
pub use memory::{
    finalize_f, lehmer_mean, success_weights, truncate_cr, weighted_mean, ParameterMemory,
    SuccessMemory, DEFAULT_MEMORY_SIZE,
};
pub use mutation::{
    binomial_crossover, generate_current_to_pbest, generate_current_to_rand, generate_rand_1_bin,
    pbest_pool_size, pick_distinct, repair_bounds, Generation, MIN_POPULATION,
};

/// The three trial-vector generation strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyId {
    /// DE/rand/1/bin
    Rand1Bin,
    /// DE/current-to-pbest/1 with binomial crossover, no archive
    CurrentToPbest1,
    /// DE/current-to-rand/1, no crossover
    CurrentToRand1,
}

impl StrategyId {
    pub const ALL: [StrategyId; 3] = [
        StrategyId::Rand1Bin,
        StrategyId::CurrentToPbest1,
        StrategyId::CurrentToRand1,
    ];

    pub fn index(self) -> usize {
        match self {
            StrategyId::Rand1Bin => 0,
            StrategyId::CurrentToPbest1 => 1,
            StrategyId::CurrentToRand1 => 2,
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyId::Rand1Bin => "rand-1-bin",
            StrategyId::CurrentToPbest1 => "current-to-pbest-1",
            StrategyId::CurrentToRand1 => "current-to-rand-1",
        })
    }
}
