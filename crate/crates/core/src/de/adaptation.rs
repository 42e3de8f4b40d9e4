//! Strategy adaptation from windowed win counts.

use std::collections::VecDeque;

use rand::Rng;

use super::StrategyId;

/// Default learning period, in generations.
pub const DEFAULT_LEARNING_PERIOD: usize = 25;

/// Sliding window of per-generation strategy wins.
///
/// The window keeps the last `L_p` generations; `NW_j` is the windowed total
/// of strategy `j` and `SR_j = NW_j / sum(NW)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyStats {
    learning_period: usize,
    window: VecDeque<[usize; 3]>,
}

impl StrategyStats {
    pub fn new(learning_period: usize) -> Self {
        assert!(learning_period >= 1, "learning period must be positive");
        Self {
            learning_period,
            window: VecDeque::with_capacity(learning_period),
        }
    }

    pub fn learning_period(&self) -> usize {
        self.learning_period
    }

    /// Appends one generation's win counts, evicting the oldest when full.
    pub fn push_generation(&mut self, wins: [usize; 3]) {
        if self.window.len() == self.learning_period {
            self.window.pop_front();
        }
        self.window.push_back(wins);
    }

    /// `NW_j` over the window.
    pub fn windowed_wins(&self) -> [usize; 3] {
        self.window.iter().fold([0; 3], |mut acc, w| {
            for (a, v) in acc.iter_mut().zip(w) {
                *a += v;
            }
            acc
        })
    }

    /// Selection probabilities used at `generation` (zero-based).
    pub fn success_rates(&self, generation: usize) -> [f64; 3] {
        let nw = self.windowed_wins();
        let total: usize = nw.iter().sum();
        if generation < self.learning_period || total == 0 {
            [1.0 / 3.0; 3]
        } else {
            nw.map(|w| w as f64 / total as f64)
        }
    }

    /// Picks a strategy: uniform during warm-up or without wins, otherwise
    /// roulette-wheel on the windowed win counts.
    pub fn select_strategy<R: Rng + ?Sized>(&self, generation: usize, rng: &mut R) -> StrategyId {
        let nw = self.windowed_wins();
        let total: usize = nw.iter().sum();
        if generation < self.learning_period || total == 0 {
            return StrategyId::ALL[rng.random_range(0..3)];
        }
        let mut ticket = rng.random_range(0..total);
        for (id, &w) in StrategyId::ALL.iter().zip(&nw) {
            if ticket < w {
                return *id;
            }
            ticket -= w;
        }
        unreachable!("ticket is below the total win count")
    }
}
