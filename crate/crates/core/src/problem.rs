//! Constrained single-objective problems and their evaluation.
//!
//! A problem is `minimize f(x)` over a box, subject to inequality constraints
//! `g_i(x) <= 0` and equality constraints `h_j(x) = 0` (satisfied when
//! `|h_j(x)| <= sigma`). All constraints are folded into one scalar overall
//! violation `phi(x)`, which is zero exactly on the feasible set.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, ProblemError};

/// Default tolerance for equality constraints.
pub const DEFAULT_SIGMA: f64 = 1e-4;

/// A scalar function over the decision space.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A box-bounded constrained minimization problem.
///
/// Immutable after construction; [`Problem::evaluate`] is pure and may be
/// called from many threads at once.
#[derive(Clone)]
pub struct Problem {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: ScalarFn,
    inequalities: Vec<ScalarFn>,
    equalities: Vec<ScalarFn>,
    sigma: f64,
    known_optimum: Option<f64>,
    known_optimizer: Option<Vec<f64>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("inequalities", &self.inequalities.len())
            .field("equalities", &self.equalities.len())
            .field("sigma", &self.sigma)
            .field("known_optimum", &self.known_optimum)
            .finish()
    }
}

impl Problem {
    /// Starts building a problem with the given bounds and objective.
    pub fn builder<F>(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        objective: F,
    ) -> ProblemBuilder
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ProblemBuilder {
            name: name.into(),
            lower,
            upper,
            objective: Arc::new(objective),
            inequalities: Vec::new(),
            equalities: Vec::new(),
            sigma: DEFAULT_SIGMA,
            known_optimum: None,
            known_optimizer: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn num_inequalities(&self) -> usize {
        self.inequalities.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    pub fn known_optimum(&self) -> Option<f64> {
        self.known_optimum
    }

    /// A point attaining [`Problem::known_optimum`], when the suite knows one.
    pub fn known_optimizer(&self) -> Option<&[f64]> {
        self.known_optimizer.as_deref()
    }

    /// Returns `true` if every coordinate lies inside the box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| lo <= v && v <= hi)
    }

    /// Evaluates objective and constraints at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, EvalError> {
        if x.len() != self.dim() {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let f = (self.objective)(x);
        if !f.is_finite() {
            return Err(EvalError::NonFiniteObjective(f));
        }
        let mut g_values = Vec::with_capacity(self.inequalities.len());
        for (index, g) in self.inequalities.iter().enumerate() {
            let value = g(x);
            if !value.is_finite() {
                return Err(EvalError::NonFiniteInequality { index, value });
            }
            g_values.push(value);
        }
        let mut h_values = Vec::with_capacity(self.equalities.len());
        for (index, h) in self.equalities.iter().enumerate() {
            let value = h(x);
            if !value.is_finite() {
                return Err(EvalError::NonFiniteEquality { index, value });
            }
            h_values.push(value);
        }
        let phi = overall_violation(&g_values, &h_values, self.sigma);
        Ok(Evaluation {
            f,
            g_values,
            h_values,
            phi,
        })
    }
}

/// Builder for [`Problem`]; validates bounds and tolerance on `build`.
pub struct ProblemBuilder {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: ScalarFn,
    inequalities: Vec<ScalarFn>,
    equalities: Vec<ScalarFn>,
    sigma: f64,
    known_optimum: Option<f64>,
    known_optimizer: Option<Vec<f64>>,
}

impl ProblemBuilder {
    /// Adds an inequality constraint, feasible when `g(x) <= 0`.
    pub fn inequality<G>(mut self, g: G) -> Self
    where
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.inequalities.push(Arc::new(g));
        self
    }

    /// Adds an equality constraint, feasible when `|h(x)| <= sigma`.
    pub fn equality<H>(mut self, h: H) -> Self
    where
        H: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.equalities.push(Arc::new(h));
        self
    }

    pub fn sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn known_optimum(mut self, value: f64, at: Vec<f64>) -> Self {
        self.known_optimum = Some(value);
        self.known_optimizer = Some(at);
        self
    }

    pub fn build(self) -> Result<Problem, ProblemError> {
        if self.lower.is_empty() {
            return Err(ProblemError::EmptyDomain);
        }
        if self.lower.len() != self.upper.len() {
            return Err(ProblemError::BoundsLength {
                lower: self.lower.len(),
                upper: self.upper.len(),
            });
        }
        for (index, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ProblemError::InvalidBounds { index, lo, hi });
            }
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(ProblemError::InvalidSigma(self.sigma));
        }
        Ok(Problem {
            name: self.name,
            lower: self.lower,
            upper: self.upper,
            objective: self.objective,
            inequalities: self.inequalities,
            equalities: self.equalities,
            sigma: self.sigma,
            known_optimum: self.known_optimum,
            known_optimizer: self.known_optimizer,
        })
    }
}

/// Objective value, raw constraint values and overall violation of a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub f: f64,
    pub g_values: Vec<f64>,
    pub h_values: Vec<f64>,
    pub phi: f64,
}

impl Evaluation {
    /// Builds an evaluation from raw constraint values.
    pub fn from_constraints(f: f64, g_values: Vec<f64>, h_values: Vec<f64>, sigma: f64) -> Self {
        let phi = overall_violation(&g_values, &h_values, sigma);
        Self {
            f,
            g_values,
            h_values,
            phi,
        }
    }

    pub fn is_feasible(&self) -> bool {
        is_feasible(self)
    }
}

/// `sum max(g_i, 0) + sum max(|h_j| - sigma, 0)`.
pub fn overall_violation(g_values: &[f64], h_values: &[f64], sigma: f64) -> f64 {
    let inequality: f64 = g_values.iter().map(|&g| g.max(0.0)).sum();
    let equality: f64 = h_values.iter().map(|&h| (h.abs() - sigma).max(0.0)).sum();
    inequality + equality
}

/// Feasible means exactly zero overall violation.
pub fn is_feasible(eval: &Evaluation) -> bool {
    eval.phi == 0.0
}

/// A decision vector together with its evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub x: Vec<f64>,
    pub eval: Evaluation,
}

impl Individual {
    pub fn new(x: Vec<f64>, eval: Evaluation) -> Self {
        Self { x, eval }
    }

    pub fn f(&self) -> f64 {
        self.eval.f
    }

    pub fn phi(&self) -> f64 {
        self.eval.phi
    }

    pub fn is_feasible(&self) -> bool {
        is_feasible(&self.eval)
    }
}

/// Identifiers of the built-in analytic problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SuiteId {
    /// Shifted sphere with one vacuous inequality.
    P1,
    /// Sphere with one active linear inequality.
    P2,
    /// Sphere with one linear equality.
    P3,
    /// Shifted sphere over two disconnected feasible hypercubes.
    P4,
    /// Rosenbrock inside a ball.
    P5,
}

impl SuiteId {
    pub const ALL: [SuiteId; 5] = [
        SuiteId::P1,
        SuiteId::P2,
        SuiteId::P3,
        SuiteId::P4,
        SuiteId::P5,
    ];

    pub fn full_name(self) -> &'static str {
        match self {
            SuiteId::P1 => "P1-sphere-shifted",
            SuiteId::P2 => "P2-active-linear",
            SuiteId::P3 => "P3-equality",
            SuiteId::P4 => "P4-disconnected",
            SuiteId::P5 => "P5-rosenbrock-ball",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            SuiteId::P1 => "P1",
            SuiteId::P2 => "P2",
            SuiteId::P3 => "P3",
            SuiteId::P4 => "P4",
            SuiteId::P5 => "P5",
        }
    }
}

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.full_name())
    }
}

impl FromStr for SuiteId {
    type Err = ProblemError;

    /// Accepts either the short (`P2`) or the full (`P2-active-linear`) name,
    /// case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SuiteId::ALL
            .into_iter()
            .find(|id| {
                s.eq_ignore_ascii_case(id.short_name()) || s.eq_ignore_ascii_case(id.full_name())
            })
            .ok_or_else(|| ProblemError::UnknownSuiteId(s.to_string()))
    }
}

const SUITE_LOWER: f64 = -5.0;
const SUITE_UPPER: f64 = 5.0;

/// Builds one of the analytic suite problems in dimension `dim`.
pub fn make_suite_problem(id: SuiteId, dim: usize) -> Result<Problem, ProblemError> {
    make_suite_problem_with_sigma(id, dim, DEFAULT_SIGMA)
}

/// [`make_suite_problem`] with a custom equality tolerance.
pub fn make_suite_problem_with_sigma(
    id: SuiteId,
    dim: usize,
    sigma: f64,
) -> Result<Problem, ProblemError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(ProblemError::InvalidSigma(sigma));
    }
    if dim < 2 {
        return Err(ProblemError::DimensionTooSmall(dim));
    }
    let lower = vec![SUITE_LOWER; dim];
    let upper = vec![SUITE_UPPER; dim];
    let name = id.full_name();
    let builder = match id {
        SuiteId::P1 => Problem::builder(name, lower, upper, |x| {
            x.iter().map(|&v| (v - 0.5) * (v - 0.5)).sum()
        })
        .inequality(|x| x[0] - 100.0)
        .known_optimum(0.0, vec![0.5; dim]),
        SuiteId::P2 => {
            // 1/D summed D times can round below 1; step up to the first
            // coordinate value whose sum satisfies the constraint.
            let mut c = 1.0 / dim as f64;
            while (0..dim).map(|_| c).sum::<f64>() < 1.0 {
                c = c.next_up();
            }
            Problem::builder(name, lower, upper, sum_of_squares)
                .inequality(|x| 1.0 - x.iter().sum::<f64>())
                .known_optimum(1.0 / dim as f64, vec![c; dim])
        }
        SuiteId::P3 => {
            // phi is zero on |x_1 + x_2 - 1| <= sigma, so the attainable minimum
            // sits on x_1 + x_2 = 1 - sigma rather than on the exact hyperplane.
            let value = (1.0 - sigma).powi(2) / 2.0;
            // Reference point nudged a hair inside the band so rounding cannot
            // leave it with a positive violation.
            let half = (1.0 - sigma * (1.0 - 1e-9)) / 2.0;
            let mut at = vec![0.0; dim];
            at[0] = half;
            at[1] = half;
            Problem::builder(name, lower, upper, sum_of_squares)
                .equality(|x| x[0] + x[1] - 1.0)
                .known_optimum(value, at)
        }
        SuiteId::P4 => Problem::builder(name, lower, upper, |x| {
            x.iter().map(|&v| (v - 2.0) * (v - 2.0)).sum()
        })
        .inequality(|x| {
            let near_origin = x.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
            let near_two = x.iter().fold(0.0_f64, |m, &v| m.max((v - 2.0).abs()));
            (near_origin - 0.5).min(near_two - 0.5)
        })
        .known_optimum(0.0, vec![2.0; dim]),
        SuiteId::P5 => {
            let radius_sq = 2.0 * dim as f64;
            Problem::builder(name, lower, upper, rosenbrock)
                .inequality(move |x| sum_of_squares(x) - radius_sq)
                .known_optimum(0.0, vec![1.0; dim])
        }
    };
    builder.sigma(sigma).build()
}

fn sum_of_squares(x: &[f64]) -> f64 {
    x.iter().map(|&v| v * v).sum()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}
