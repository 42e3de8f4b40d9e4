//! The PPS-DE main loop and its two ablation baselines.
//!
//! Each generation the population is sorted by the feasibility rules and split
//! into a top sub-population of size `T` and a bottom one of size `N - T`.
//! Every top target gets one trial from each of the three strategies; the best
//! of the three (under the current phase's comparator) earns its strategy a
//! win. Every bottom target gets a single trial from a strategy chosen by the
//! windowed win rates. All trials then compete one-to-one with their parents.
//!
//! A generation costs `3T + (N - T)` evaluations and is only started when the
//! whole cost fits in the remaining budget.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comparator::{sf_compare, sort_sf, Comparison, SelectionRule};
use crate::de::{
    Generation, ParameterMemory, StrategyId, StrategyStats, DEFAULT_LEARNING_PERIOD,
    DEFAULT_MEMORY_SIZE, MIN_POPULATION,
};
use crate::error::{ConfigError, RunError};
use crate::pps::{
    EpsilonParams, EpsilonState, Phase, SwitchState, DEFAULT_DELTA, DEFAULT_SWITCH_THRESHOLD,
    PUSH_EPSILON,
};
use crate::problem::{Individual, Problem};

/// Which solver to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    /// Push-and-pull search in the top sub-population.
    #[serde(rename = "pps-de")]
    PpsDe,
    /// Feasibility rules throughout.
    #[serde(rename = "sf-de")]
    SfDe,
    /// Epsilon-level comparison from the first generation.
    #[serde(rename = "eps-de")]
    EpsDe,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::PpsDe, Algorithm::SfDe, Algorithm::EpsDe];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::PpsDe => "pps-de",
            Algorithm::SfDe => "sf-de",
            Algorithm::EpsDe => "eps-de",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!("unknown algorithm '{s}', expected one of: pps-de, sf-de, eps-de")
            })
    }
}

/// Settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// `N_P`
    pub pop_size: usize,
    /// `T`, size of the top sub-population.
    pub top_size: usize,
    /// `L`, used both for the switch test and the win window.
    pub learning_period: usize,
    pub p_fraction: f64,
    pub max_fes: u64,
    /// `H`, cells per parameter memory.
    pub memory_size: usize,
    pub switch_threshold: f64,
    pub delta: f64,
    /// Quantile of the population's violations that seeds `eps_0`.
    pub theta: f64,
    pub tau: f64,
    pub alpha: f64,
    pub cp: f64,
    /// `Tc` as a fraction of the generation budget `max_fes / (2 N_P)`.
    pub tc_fraction: f64,
    /// Explicit `Tc`, overriding `tc_fraction`.
    pub tc: Option<usize>,
    /// Fixed `eps_0` instead of the population quantile.
    pub eps0: Option<f64>,
    pub seed: u64,
}

impl RunConfig {
    /// Defaults for dimension `dim`: `N_P = 5D`, `T = N_P / 2`, `L = 25`,
    /// `p = 0.05`, `MaxFES = 20000 D`, `H = 5`.
    pub fn for_dim(dim: usize) -> Self {
        let pop_size = 5 * dim;
        Self {
            algorithm: Algorithm::PpsDe,
            pop_size,
            top_size: pop_size / 2,
            learning_period: DEFAULT_LEARNING_PERIOD,
            p_fraction: 0.05,
            max_fes: 20_000 * dim as u64,
            memory_size: DEFAULT_MEMORY_SIZE,
            switch_threshold: DEFAULT_SWITCH_THRESHOLD,
            delta: DEFAULT_DELTA,
            theta: 0.95,
            tau: 0.1,
            alpha: 0.95,
            cp: 2.0,
            tc_fraction: 0.9,
            tc: None,
            eps0: None,
            seed: 0,
        }
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Evaluations spent per generation.
    pub fn fes_per_generation(&self) -> u64 {
        (3 * self.top_size + (self.pop_size - self.top_size)) as u64
    }

    /// `Tc` in pull generations.
    pub fn effective_tc(&self) -> usize {
        self.tc.unwrap_or_else(|| {
            let max_gen = self.max_fes as f64 / (2.0 * self.pop_size as f64);
            (self.tc_fraction * max_gen).floor() as usize
        })
    }

    pub fn epsilon_params(&self) -> EpsilonParams {
        EpsilonParams {
            tau: self.tau,
            alpha: self.alpha,
            cp: self.cp,
            tc: self.effective_tc(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pop_size < MIN_POPULATION {
            return Err(ConfigError::PopulationSize(self.pop_size));
        }
        if self.top_size < MIN_POPULATION || self.top_size > self.pop_size {
            return Err(ConfigError::TopSize {
                top: self.top_size,
                pop: self.pop_size,
            });
        }
        if self.max_fes < self.pop_size as u64 {
            return Err(ConfigError::Budget {
                max_fes: self.max_fes,
                pop: self.pop_size,
            });
        }
        if self.memory_size == 0 {
            return Err(ConfigError::MemorySize);
        }
        if self.learning_period == 0 {
            return Err(ConfigError::LearningPeriod);
        }
        let unit = |name, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { name, value: v })
            }
        };
        unit("theta", self.theta)?;
        unit("tau", self.tau)?;
        unit("alpha", self.alpha)?;
        unit("tc_fraction", self.tc_fraction)?;
        if !(self.p_fraction > 0.0 && self.p_fraction <= 1.0) {
            return Err(ConfigError::OutOfRange {
                name: "p_fraction",
                value: self.p_fraction,
            });
        }
        if !(self.cp.is_finite() && self.cp >= 0.0) {
            return Err(ConfigError::OutOfRange {
                name: "cp",
                value: self.cp,
            });
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(ConfigError::OutOfRange {
                name: "delta",
                value: self.delta,
            });
        }
        if !self.switch_threshold.is_finite() {
            return Err(ConfigError::OutOfRange {
                name: "switch_threshold",
                value: self.switch_threshold,
            });
        }
        if let Some(e) = self.eps0 {
            if !(e.is_finite() && e >= 0.0) {
                return Err(ConfigError::OutOfRange {
                    name: "eps0",
                    value: e,
                });
            }
        }
        Ok(())
    }
}

/// Per-generation observables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 0 is the initial population.
    pub generation: usize,
    /// Evaluations consumed at the end of this generation.
    pub fes: u64,
    /// Objective of the best-so-far individual under the feasibility rules.
    pub best_f: f64,
    pub best_phi: f64,
    /// Phase the generation ran in.
    pub phase: Phase,
    /// Epsilon level the generation ran with (`inf` during push).
    pub eps: f64,
    /// Strategy selection probabilities used for the bottom sub-population.
    pub success_rates: [f64; 3],
    /// Wins credited in the top sub-population this generation.
    pub wins: [usize; 3],
    /// Bottom targets assigned to each strategy this generation.
    pub bottom_picks: [usize; 3],
    /// Smallest objective value in the population, regardless of feasibility.
    pub pop_min_f: f64,
}

/// Outcome of one run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Best individual ever seen under the feasibility rules.
    pub best: Individual,
    pub trace: Vec<TraceRecord>,
    pub final_fes: u64,
    pub generations: usize,
    pub switch_generation: Option<usize>,
    pub population: Vec<Individual>,
    pub wall_time: Duration,
}

/// Snapshot handed to an observer after every generation.
#[derive(Debug)]
pub struct GenerationView<'a> {
    pub record: &'a TraceRecord,
    pub population: &'a [Individual],
    pub memory: &'a ParameterMemory,
}

/// SF-best of `population`, compared against the retained `historical` best.
pub fn best_so_far(
    historical: Option<&Individual>,
    population: &[Individual],
) -> Option<Individual> {
    let mut best = historical;
    for ind in population {
        best = match best {
            Some(b) if sf_compare(b, ind) != Comparison::SecondBetter => Some(b),
            _ => Some(ind),
        };
    }
    best.cloned()
}

fn feasible_ratio(population: &[Individual]) -> f64 {
    let feasible = population.iter().filter(|i| i.is_feasible()).count();
    feasible as f64 / population.len() as f64
}

fn min_objective(population: &[Individual]) -> f64 {
    population
        .iter()
        .map(Individual::f)
        .fold(f64::INFINITY, f64::min)
}

struct Offspring {
    target: usize,
    trial: Individual,
    strategy: StrategyId,
    f: f64,
    cr: f64,
}

/// Configurable runner; [`run`], [`run_ppsde`] and [`run_baseline`] wrap it.
pub struct Solver<'p> {
    problem: &'p Problem,
    config: RunConfig,
    forced_winner: Option<StrategyId>,
}

impl<'p> Solver<'p> {
    pub fn new(problem: &'p Problem, config: RunConfig) -> Self {
        Self {
            problem,
            config,
            forced_winner: None,
        }
    }

    /// Diagnostic hook: the given strategy's trial is taken as the best trial
    /// of every top target, so it collects every win.
    pub fn with_forced_winner(mut self, strategy: StrategyId) -> Self {
        self.forced_winner = Some(strategy);
        self
    }

    pub fn run(&self) -> Result<RunResult, RunError> {
        self.run_with_observer(|_| {})
    }

    pub fn run_with_observer<O>(&self, mut observer: O) -> Result<RunResult, RunError>
    where
        O: FnMut(&GenerationView<'_>),
    {
        let started = Instant::now();
        let cfg = &self.config;
        cfg.validate()?;
        let problem = self.problem;
        let n = cfg.pop_size;
        let top = cfg.top_size;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

        let mut population = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = problem
                .lower()
                .iter()
                .zip(problem.upper())
                .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect();
            let eval = problem.evaluate(&x)?;
            population.push(Individual::new(x, eval));
        }
        let mut fes = n as u64;

        let mut memory = ParameterMemory::new(cfg.memory_size)?;
        let mut stats = StrategyStats::new(cfg.learning_period);
        let mut switch = SwitchState::new(cfg.learning_period, cfg.switch_threshold, cfg.delta);
        let mut epsilon: Option<EpsilonState> = None;

        let start_epsilon = |pop: &[Individual]| {
            let eps_0 = cfg.eps0.unwrap_or_else(|| {
                let phis: Vec<f64> = pop.iter().map(Individual::phi).collect();
                EpsilonState::initial_level(&phis, cfg.theta)
            });
            EpsilonState::new(eps_0, cfg.epsilon_params())
        };

        match cfg.algorithm {
            Algorithm::PpsDe => {
                switch.update_rate(0, min_objective(&population));
            }
            Algorithm::EpsDe => {
                switch.start_in_pull(0);
                epsilon = Some(start_epsilon(&population));
            }
            Algorithm::SfDe => switch.start_in_pull(0),
        }

        let mut best = best_so_far(None, &population).expect("population is non-empty");
        let initial_eps = match cfg.algorithm {
            Algorithm::PpsDe => PUSH_EPSILON,
            Algorithm::SfDe => 0.0,
            Algorithm::EpsDe => epsilon.as_ref().map_or(0.0, EpsilonState::eps_0),
        };
        let mut trace = vec![TraceRecord {
            generation: 0,
            fes,
            best_f: best.f(),
            best_phi: best.phi(),
            phase: switch.phase(),
            eps: initial_eps,
            success_rates: stats.success_rates(0),
            wins: [0; 3],
            bottom_picks: [0; 3],
            pop_min_f: min_objective(&population),
        }];
        observer(&GenerationView {
            record: &trace[0],
            population: &population,
            memory: &memory,
        });

        let cost = cfg.fes_per_generation();
        let mut generation = 0usize;
        while fes + cost <= cfg.max_fes {
            generation += 1;
            let index = generation - 1;
            memory.begin_generation();

            let phase = switch.phase();
            let rule = match (cfg.algorithm, phase) {
                (Algorithm::SfDe, _) => SelectionRule::Sf,
                (_, Phase::Push) => SelectionRule::Push,
                (_, Phase::Pull) => {
                    // The first pull generation runs with k = 0, i.e. eps_0.
                    let k = generation - switch.switch_generation().unwrap_or(0) - 1;
                    let ratio = feasible_ratio(&population);
                    let state = epsilon
                        .as_mut()
                        .expect("epsilon state exists in pull phase");
                    SelectionRule::Pull {
                        eps: state.epsilon_level(k, ratio)?,
                    }
                }
            };
            let eps_used = match rule {
                SelectionRule::Push => PUSH_EPSILON,
                SelectionRule::Pull { eps } => eps,
                SelectionRule::Sf => 0.0,
            };

            let order = sort_sf(&population);
            let positions: Vec<Vec<f64>> = population.iter().map(|i| i.x.clone()).collect();
            let view = Generation {
                positions: &positions,
                sf_order: &order,
                lower: problem.lower(),
                upper: problem.upper(),
                p_fraction: cfg.p_fraction,
            };

            let mut offspring = Vec::with_capacity(n);
            let mut wins = [0usize; 3];
            for &target in &order[..top] {
                let mut trials = Vec::with_capacity(3);
                for strategy in StrategyId::ALL {
                    let (f, cr) = memory.sample_parameters(strategy, &mut rng);
                    let x = view.generate(strategy, target, f, cr, &mut rng)?;
                    let eval = problem.evaluate(&x)?;
                    fes += 1;
                    trials.push(Offspring {
                        target,
                        trial: Individual::new(x, eval),
                        strategy,
                        f,
                        cr,
                    });
                }
                let winner = match self.forced_winner {
                    Some(s) => s.index(),
                    None => (1..3).fold(0, |best, k| {
                        if rule.strictly_prefers(&trials[best].trial.eval, &trials[k].trial.eval) {
                            k
                        } else {
                            best
                        }
                    }),
                };
                wins[winner] += 1;
                offspring.push(trials.swap_remove(winner));
            }
            stats.push_generation(wins);
            let success_rates = stats.success_rates(index);

            let mut bottom_picks = [0usize; 3];
            for &target in &order[top..] {
                let strategy = stats.select_strategy(index, &mut rng);
                bottom_picks[strategy.index()] += 1;
                let (f, cr) = memory.sample_parameters(strategy, &mut rng);
                let x = view.generate(strategy, target, f, cr, &mut rng)?;
                let eval = problem.evaluate(&x)?;
                fes += 1;
                offspring.push(Offspring {
                    target,
                    trial: Individual::new(x, eval),
                    strategy,
                    f,
                    cr,
                });
            }

            for child in offspring {
                let parent = &population[child.target];
                let verdict = rule.verdict(parent, &child.trial);
                if let Some(delta) = verdict.improvement(&parent.eval, &child.trial.eval) {
                    memory.record_success(child.strategy, child.f, child.cr, delta)?;
                    population[child.target] = child.trial;
                }
            }
            memory.update_all();

            best = best_so_far(Some(&best), &population).expect("population is non-empty");
            let pop_min_f = min_objective(&population);
            if cfg.algorithm == Algorithm::PpsDe {
                switch.update_rate(generation, pop_min_f);
                if switch.should_switch() {
                    epsilon = Some(start_epsilon(&population));
                }
            }

            trace.push(TraceRecord {
                generation,
                fes,
                best_f: best.f(),
                best_phi: best.phi(),
                phase,
                eps: eps_used,
                success_rates,
                wins,
                bottom_picks,
                pop_min_f,
            });
            observer(&GenerationView {
                record: trace.last().expect("just pushed"),
                population: &population,
                memory: &memory,
            });
        }

        Ok(RunResult {
            algorithm: cfg.algorithm,
            seed: cfg.seed,
            best,
            trace,
            final_fes: fes,
            generations: generation,
            switch_generation: match cfg.algorithm {
                Algorithm::PpsDe => switch.switch_generation(),
                _ => None,
            },
            population,
            wall_time: started.elapsed(),
        })
    }
}

/// Runs whichever algorithm `config` names.
pub fn run(problem: &Problem, config: RunConfig) -> Result<RunResult, RunError> {
    Solver::new(problem, config).run()
}

/// Runs PPS-DE regardless of `config.algorithm`.
pub fn run_ppsde(problem: &Problem, config: RunConfig) -> Result<RunResult, RunError> {
    run(problem, config.with_algorithm(Algorithm::PpsDe))
}

/// Runs one of the ablation baselines.
pub fn run_baseline(problem: &Problem, config: RunConfig) -> Result<RunResult, RunError> {
    if config.algorithm == Algorithm::PpsDe {
        return Err(ConfigError::NotABaseline(config.algorithm.to_string()).into());
    }
    run(problem, config)
}
