//! Pairwise selection rules.
//!
//! Three acceptance tests decide whether a trial vector replaces its parent:
//! superiority of feasible solutions (SF), push (objective only) and pull
//! (epsilon-level). Each test reports *which key* decided an acceptance, since
//! the parameter adaptation weights successes by the improvement on that key.

use std::cmp::Ordering;

use crate::problem::{Evaluation, Individual};

impl AsRef<Evaluation> for Evaluation {
    fn as_ref(&self) -> &Evaluation {
        self
    }
}

impl AsRef<Evaluation> for Individual {
    fn as_ref(&self) -> &Evaluation {
        &self.eval
    }
}

/// Outcome of comparing two evaluated points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    FirstBetter,
    SecondBetter,
    Tie,
}

impl Comparison {
    pub fn reversed(self) -> Self {
        match self {
            Comparison::FirstBetter => Comparison::SecondBetter,
            Comparison::SecondBetter => Comparison::FirstBetter,
            Comparison::Tie => Comparison::Tie,
        }
    }

    fn from_ordering(ord: Ordering) -> Self {
        match ord {
            Ordering::Less => Comparison::FirstBetter,
            Ordering::Greater => Comparison::SecondBetter,
            Ordering::Equal => Comparison::Tie,
        }
    }
}

/// Which quantity justified replacing a parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Rejected,
    /// Replacement decided on the objective value.
    Objective,
    /// Replacement decided on the overall violation.
    Violation,
}

impl Verdict {
    pub fn accepted(self) -> bool {
        self != Verdict::Rejected
    }

    /// Improvement magnitude on the deciding key, or `None` when rejected.
    pub fn improvement(self, parent: &Evaluation, trial: &Evaluation) -> Option<f64> {
        match self {
            Verdict::Rejected => None,
            Verdict::Objective => Some((parent.f - trial.f).abs()),
            Verdict::Violation => Some((parent.phi - trial.phi).abs()),
        }
    }
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Deb's feasibility rules.
///
/// Feasible beats infeasible, lower violation wins among infeasible points and
/// lower objective wins among feasible ones. Infeasible points with exactly
/// equal violation fall back to the objective, which keeps this rule identical
/// to the epsilon comparison at level zero.
pub fn sf_compare(a: impl AsRef<Evaluation>, b: impl AsRef<Evaluation>) -> Comparison {
    let (a, b) = (a.as_ref(), b.as_ref());
    match (a.is_feasible(), b.is_feasible()) {
        (true, true) => Comparison::from_ordering(cmp_f64(a.f, b.f)),
        (true, false) => Comparison::FirstBetter,
        (false, true) => Comparison::SecondBetter,
        (false, false) => Comparison::from_ordering(cmp_f64(a.phi, b.phi).then(cmp_f64(a.f, b.f))),
    }
}

/// SF replacement: the trial survives unless the parent is strictly better.
pub fn sf_verdict(parent: impl AsRef<Evaluation>, trial: impl AsRef<Evaluation>) -> Verdict {
    let (parent, trial) = (parent.as_ref(), trial.as_ref());
    match sf_compare(parent, trial) {
        Comparison::FirstBetter => Verdict::Rejected,
        // Equal violation (feasible pairs included) means f decided.
        _ if parent.phi == trial.phi => Verdict::Objective,
        _ => Verdict::Violation,
    }
}

/// Push replacement: constraints are ignored, ties go to the trial.
pub fn push_select(parent: impl AsRef<Evaluation>, trial: impl AsRef<Evaluation>) -> bool {
    push_verdict(parent, trial).accepted()
}

pub fn push_verdict(parent: impl AsRef<Evaluation>, trial: impl AsRef<Evaluation>) -> Verdict {
    if trial.as_ref().f <= parent.as_ref().f {
        Verdict::Objective
    } else {
        Verdict::Rejected
    }
}

/// Epsilon-level replacement.
///
/// Branches are tested in this order: both within `eps` (compare objective),
/// equal violation (compare objective), strictly lower violation.
pub fn pull_select(
    parent: impl AsRef<Evaluation>,
    trial: impl AsRef<Evaluation>,
    eps: f64,
) -> bool {
    pull_verdict(parent, trial, eps).accepted()
}

// The first two branches share a body on purpose; their order matters.
#[allow(clippy::if_same_then_else)]
pub fn pull_verdict(
    parent: impl AsRef<Evaluation>,
    trial: impl AsRef<Evaluation>,
    eps: f64,
) -> Verdict {
    let (parent, trial) = (parent.as_ref(), trial.as_ref());
    if trial.phi <= eps && parent.phi <= eps {
        if trial.f <= parent.f {
            Verdict::Objective
        } else {
            Verdict::Rejected
        }
    } else if trial.phi == parent.phi {
        if trial.f <= parent.f {
            Verdict::Objective
        } else {
            Verdict::Rejected
        }
    } else if trial.phi < parent.phi {
        Verdict::Violation
    } else {
        Verdict::Rejected
    }
}

/// The replacement rule in force for a comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelectionRule {
    Push,
    Pull { eps: f64 },
    Sf,
}

impl SelectionRule {
    pub fn verdict(self, parent: impl AsRef<Evaluation>, trial: impl AsRef<Evaluation>) -> Verdict {
        match self {
            SelectionRule::Push => push_verdict(parent, trial),
            SelectionRule::Pull { eps } => pull_verdict(parent, trial, eps),
            SelectionRule::Sf => sf_verdict(parent, trial),
        }
    }

    /// `true` when `challenger` is strictly preferred over `incumbent`: it
    /// would replace the incumbent, and the incumbent would not replace it.
    pub fn strictly_prefers(self, incumbent: &Evaluation, challenger: &Evaluation) -> bool {
        self.verdict(incumbent, challenger).accepted()
            && !self.verdict(challenger, incumbent).accepted()
    }
}

/// Index permutation ordering `population` best-first under [`sf_compare`].
///
/// Ties keep their original relative order.
pub fn sort_sf<T: AsRef<Evaluation>>(population: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&i, &j| match sf_compare(&population[i], &population[j]) {
        Comparison::FirstBetter => Ordering::Less,
        Comparison::SecondBetter => Ordering::Greater,
        Comparison::Tie => Ordering::Equal,
    });
    order
}
