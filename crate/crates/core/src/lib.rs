//! Constrained single-objective optimization with a push-and-pull
//! differential evolution.
//!
//! A run first ignores the constraints entirely ("push") and only minimizes the
//! objective. Once the best objective stagnates it switches, for good, to an
//! epsilon-constrained comparison ("pull") whose tolerance shrinks to zero.
//! Offspring come from three DE strategies with self-adapted `F`/`CR`
//! memories and a success-rate driven strategy choice.
//!
//! ```no_run
//! use ppsde::optimizer::{run_ppsde, RunConfig};
//! use ppsde::problem::{make_suite_problem, SuiteId};
//!
//! let problem = make_suite_problem(SuiteId::P2, 10).unwrap();
//! let result = run_ppsde(&problem, RunConfig::for_dim(10).with_seed(1)).unwrap();
//! println!("f = {} phi = {}", result.best.f(), result.best.phi());
//! ```

pub mod cli;
pub mod comparator;
pub mod de;
pub mod error;
pub mod optimizer;
pub mod pps;
pub mod problem;
pub mod report;
pub mod stats;

pub use error::{
    ConfigError, DeError, EvalError, ProblemError, RunError, ScheduleError, StatsError,
};
pub use optimizer::{run_baseline, run_ppsde, Algorithm, RunConfig, RunResult, Solver};
pub use problem::{make_suite_problem, Evaluation, Individual, Problem, SuiteId};
