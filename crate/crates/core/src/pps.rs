//! Push-to-pull switching and the epsilon-level schedule.
//!
//! During the push phase constraints are ignored. The controller watches the
//! population's minimal objective value; once its relative change over the
//! last `L` generations drops to the threshold, the search switches to the
//! pull phase for good, and an epsilon level starting at `eps_0` relaxes the
//! feasibility test until it reaches zero at `Tc` pull generations.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;

pub const DEFAULT_SWITCH_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_DELTA: f64 = 1e-6;

/// Search phase of the top sub-population.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Push,
    Pull,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Push => "push",
            Phase::Pull => "pull",
        }
    }
}

/// Tracks the change rate `r_G` and the irreversible push-to-pull switch.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchState {
    learning_period: usize,
    threshold: f64,
    delta: f64,
    rate: f64,
    generation: usize,
    // Minimal objective values of the last L + 1 generations.
    history: VecDeque<f64>,
    phase: Phase,
    switch_generation: Option<usize>,
}

impl SwitchState {
    pub fn new(learning_period: usize, threshold: f64, delta: f64) -> Self {
        Self {
            learning_period,
            threshold,
            delta,
            rate: 1.0,
            generation: 0,
            history: VecDeque::with_capacity(learning_period + 1),
            phase: Phase::Push,
            switch_generation: None,
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn switch_generation(&self) -> Option<usize> {
        self.switch_generation
    }

    /// Records generation `generation`'s minimal objective and returns `r_G`.
    ///
    /// `r_G = (f_{G-L} - f_G) / max(|f_{G-L}|, delta)` once `L` earlier values
    /// exist, and `1.0` before that.
    pub fn update_rate(&mut self, generation: usize, best_f_now: f64) -> f64 {
        self.generation = generation;
        self.history.push_back(best_f_now);
        if self.history.len() > self.learning_period + 1 {
            self.history.pop_front();
        }
        self.rate = if generation >= self.learning_period
            && self.history.len() == self.learning_period + 1
        {
            let past = self.history[0];
            (past - best_f_now) / past.abs().max(self.delta)
        } else {
            1.0
        };
        self.rate
    }

    /// Flips to the pull phase when `r_G <= threshold`. Returns `true` only on
    /// the generation the switch happens.
    pub fn should_switch(&mut self) -> bool {
        if self.phase == Phase::Push && self.rate <= self.threshold {
            self.phase = Phase::Pull;
            self.switch_generation = Some(self.generation);
            true
        } else {
            false
        }
    }

    /// Forces the pull phase from `generation` on.
    pub fn start_in_pull(&mut self, generation: usize) {
        self.phase = Phase::Pull;
        self.switch_generation = Some(generation);
    }
}

/// Tunables of the epsilon-level schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonParams {
    /// Shrink rate applied while the feasible ratio is below `alpha`.
    pub tau: f64,
    /// Feasible-ratio trigger.
    pub alpha: f64,
    /// Decay exponent of the polynomial branch.
    pub cp: f64,
    /// Pull generation from which the level is exactly zero.
    pub tc: usize,
}

impl Default for EpsilonParams {
    fn default() -> Self {
        Self {
            tau: 0.1,
            alpha: 0.95,
            cp: 2.0,
            tc: 1800,
        }
    }
}

/// Epsilon-level state of the pull phase.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonState {
    params: EpsilonParams,
    eps_0: f64,
    eps_k: f64,
    k: Option<usize>,
}

impl EpsilonState {
    pub fn new(eps_0: f64, params: EpsilonParams) -> Self {
        let eps_0 = eps_0.max(0.0);
        Self {
            params,
            eps_0,
            eps_k: eps_0,
            k: None,
        }
    }

    /// Initial level from the population's violations: the value at the
    /// `theta` quantile (index `ceil(theta n) - 1` of the ascending sort).
    pub fn initial_level(violations: &[f64], theta: f64) -> f64 {
        if violations.is_empty() {
            return 0.0;
        }
        let mut sorted = violations.to_vec();
        sorted.sort_by(f64::total_cmp);
        let idx = ((theta * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
        sorted[idx]
    }

    pub fn eps_0(&self) -> f64 {
        self.eps_0
    }

    pub fn current(&self) -> f64 {
        self.eps_k
    }

    pub fn params(&self) -> &EpsilonParams {
        &self.params
    }

    /// Level for pull generation `k` (generations since the switch).
    ///
    /// Zero from `Tc` on; otherwise the previous level shrinks by `1 - tau`
    /// while fewer than `alpha` of the population are feasible, and follows
    /// `eps_0 (1 - k / Tc)^cp` otherwise.
    pub fn epsilon_level(&mut self, k: usize, feasible_ratio: f64) -> Result<f64, ScheduleError> {
        if !(0.0..=1.0).contains(&feasible_ratio) {
            return Err(ScheduleError::InvalidFeasibleRatio(feasible_ratio));
        }
        if let Some(previous) = self.k {
            if k < previous {
                return Err(ScheduleError::CounterDecreased {
                    previous,
                    requested: k,
                });
            }
        }
        let p = self.params;
        let level = if k >= p.tc {
            0.0
        } else if k == 0 {
            self.eps_0
        } else if feasible_ratio < p.alpha {
            (1.0 - p.tau) * self.eps_k
        } else {
            self.eps_0 * (1.0 - k as f64 / p.tc as f64).powf(p.cp)
        };
        self.k = Some(k);
        self.eps_k = level;
        Ok(level)
    }
}

/// Level used during the push phase, where it never enters a comparison.
pub const PUSH_EPSILON: f64 = f64::INFINITY;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_is_one_during_warm_up() {
        let mut s = SwitchState::new(25, 1e-3, 1e-6);
        for g in 0..25 {
            assert_eq!(s.update_rate(g, 10.0 - g as f64), 1.0);
            assert!(!s.should_switch());
        }
        assert_eq!(s.update_rate(3, 1.0), 1.0);
    }

    #[test]
    fn rate_matches_relative_change() {
        let mut s = SwitchState::new(2, 1e-3, 1e-6);
        s.update_rate(0, 10.0);
        s.update_rate(1, 9.999);
        let r = s.update_rate(2, 9.995);
        assert!((r - 5e-4).abs() < 1e-12);
        assert!(s.should_switch());
        assert_eq!(s.phase(), Phase::Pull);
        assert_eq!(s.switch_generation(), Some(2));
    }

    #[test]
    fn rate_denominator_is_clamped() {
        let mut s = SwitchState::new(1, 1e-3, 1e-6);
        s.update_rate(0, 0.0);
        let r = s.update_rate(1, -0.01);
        assert!((r - 1e4).abs() < 1e-6);
        assert!(!s.should_switch());
    }

    #[test]
    fn switch_is_irreversible() {
        let mut s = SwitchState::new(1, 1e-3, 1e-6);
        s.update_rate(0, 1.0);
        s.update_rate(1, 1.0);
        assert!(s.should_switch());
        s.update_rate(2, 0.5);
        assert!(!s.should_switch());
        s.update_rate(3, 0.5);
        assert!(!s.should_switch());
        assert_eq!(s.phase(), Phase::Pull);
        assert_eq!(s.switch_generation(), Some(1));
    }

    #[test]
    fn no_switch_above_threshold() {
        let mut s = SwitchState::new(1, 1e-3, 1e-6);
        s.update_rate(0, 1.0);
        s.update_rate(1, 1.0 - 2e-3);
        assert!(!s.should_switch());
    }

    #[test]
    fn constant_stream_switches_exactly_at_learning_period() {
        let l = 25;
        let mut s = SwitchState::new(l, 1e-3, 1e-6);
        let mut fired = None;
        for g in 0..=2 * l {
            s.update_rate(g, 3.7);
            if s.should_switch() {
                fired.get_or_insert(g);
            }
        }
        assert_eq!(fired, Some(l));
    }

    fn params(tc: usize) -> EpsilonParams {
        EpsilonParams {
            tau: 0.1,
            alpha: 0.95,
            cp: 2.0,
            tc,
        }
    }

    #[test]
    fn shrink_branch() {
        let mut e = EpsilonState::new(1.0, params(100));
        assert!((e.epsilon_level(1, 0.0).unwrap() - 0.9).abs() < 1e-15);
        assert!((e.epsilon_level(2, 0.0).unwrap() - 0.81).abs() < 1e-15);
    }

    #[test]
    fn polynomial_branch_and_cutoff() {
        let mut e = EpsilonState::new(1.0, params(100));
        assert!((e.epsilon_level(50, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(e.epsilon_level(100, 0.0).unwrap(), 0.0);
        assert_eq!(e.epsilon_level(150, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn counter_must_not_decrease() {
        let mut e = EpsilonState::new(1.0, params(100));
        e.epsilon_level(5, 0.5).unwrap();
        assert!(matches!(
            e.epsilon_level(4, 0.5),
            Err(ScheduleError::CounterDecreased {
                previous: 5,
                requested: 4
            })
        ));
        assert!(e.epsilon_level(6, 1.5).is_err());
    }

    #[test]
    fn shrink_is_strictly_decreasing_and_bounded() {
        let mut e = EpsilonState::new(2.5, params(1000));
        let mut prev = e.eps_0();
        for k in 1..200 {
            let v = e.epsilon_level(k, 0.1).unwrap();
            assert!(v < prev && v >= 0.0 && v <= e.eps_0());
            prev = v;
        }
    }

    #[test]
    fn initial_level_quantile() {
        let phis: Vec<f64> = (0..20).map(|i| i as f64).collect();
        // ceil(0.95 * 20) - 1 = 18
        assert_eq!(EpsilonState::initial_level(&phis, 0.95), 18.0);
        assert_eq!(EpsilonState::initial_level(&[3.0], 0.95), 3.0);
        assert_eq!(EpsilonState::initial_level(&[], 0.95), 0.0);
        assert_eq!(EpsilonState::initial_level(&[5.0, 1.0], 0.0), 1.0);
    }
}
