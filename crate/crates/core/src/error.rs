use thiserror::Error;

/// Failure while evaluating a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point has {actual} coordinates, problem dimension is {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("objective returned non-finite value {0}")]
    NonFiniteObjective(f64),
    #[error("inequality constraint {index} returned non-finite value {value}")]
    NonFiniteInequality { index: usize, value: f64 },
    #[error("equality constraint {index} returned non-finite value {value}")]
    NonFiniteEquality { index: usize, value: f64 },
}

/// Invalid problem definition or suite request.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("problem has no decision variables")]
    EmptyDomain,
    #[error("lower bounds have length {lower}, upper bounds have length {upper}")]
    BoundsLength { lower: usize, upper: usize },
    #[error("bounds for dimension {index} are invalid: [{lo}, {hi}]")]
    InvalidBounds { index: usize, lo: f64, hi: f64 },
    #[error("equality tolerance must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
    #[error("unknown suite problem '{0}' (expected one of P1..P5)")]
    UnknownSuiteId(String),
    #[error("suite problems need dimension >= 2, got {0}")]
    DimensionTooSmall(usize),
}

/// Errors from the differential-evolution operators and adaptation state.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeError {
    #[error("population of {0} is too small, strategies need at least 4 members")]
    PopulationTooSmall(usize),
    #[error("improvement magnitude must be non-negative and finite, got {0}")]
    NegativeDelta(f64),
    #[error("memory size must be at least 1")]
    EmptyMemory,
}

/// Errors from the epsilon-level schedule.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("pull-generation counter went backwards: {previous} -> {requested}")]
    CounterDecreased { previous: usize, requested: usize },
    #[error("feasible ratio must lie in [0, 1], got {0}")]
    InvalidFeasibleRatio(f64),
}

/// Invalid run configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("top sub-population size {top} must satisfy 4 <= T <= N_P = {pop}")]
    TopSize { top: usize, pop: usize },
    #[error("population size {0} is below the minimum of 4")]
    PopulationSize(usize),
    #[error("evaluation budget {max_fes} is smaller than the population size {pop}")]
    Budget { max_fes: u64, pop: usize },
    #[error("{name} = {value} is outside its valid range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("memory size H must be at least 1")]
    MemorySize,
    #[error("learning period L must be at least 1")]
    LearningPeriod,
    #[error("'{0}' is not a baseline algorithm (expected sf-de or eps-de)")]
    NotABaseline(String),
}

/// Anything that can stop a single optimization run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    De(#[from] DeError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Errors from the statistics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("cannot summarize an empty sample")]
    Empty,
    #[error("ranking needs at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("row {row} has {got} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("cell ({row}, {col}) is missing or non-finite")]
    MissingCell { row: usize, col: usize },
}
