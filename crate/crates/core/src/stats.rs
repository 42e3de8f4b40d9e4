//! Cross-run aggregation and the Friedman aligned-ranks test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::StatsError;

/// Significance level used when reporting the aligned-ranks test.
pub const SIGNIFICANCE: f64 = 0.05;

/// Sample statistics of one cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator, 0 for one value).
    pub std: f64,
    pub best: f64,
    pub worst: f64,
    pub median: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    };
    Ok(Summary {
        mean,
        std,
        best: sorted[0],
        worst: sorted[sorted.len() - 1],
        median,
    })
}

/// Average (mid) ranks of `values`, 1-based; ties share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

/// Result of [`friedman_aligned`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedRanks {
    /// Mean aligned rank of each algorithm (lower is better).
    pub avg_ranks: Vec<f64>,
    /// Joint ranks, row-major (problems x algorithms).
    pub ranks: Vec<Vec<f64>>,
    pub statistic: f64,
    pub p_value: f64,
}

impl AlignedRanks {
    pub fn significant(&self) -> bool {
        self.p_value < SIGNIFICANCE
    }
}

/// Friedman aligned-ranks test over a problems x algorithms matrix.
///
/// Each row is centred on its mean, all `n k` aligned values are ranked jointly,
/// and the Hodges-Lehmann statistic
///
/// ```text
/// T = (k - 1) [sum_j R_j^2 - (k n^2 / 4)(kn + 1)^2] / [sum_ij r_ij^2 - (1/k) sum_i R_i^2]
/// ```
///
/// (`R_j` column rank totals, `R_i` row rank totals) is compared against a
/// chi-square distribution with `k - 1` degrees of freedom. A zero denominator
/// only arises when every row is fully tied; the statistic is then 0.
pub fn friedman_aligned(cell_means: &[Vec<f64>]) -> Result<AlignedRanks, StatsError> {
    let n = cell_means.len();
    if n < 2 {
        return Err(StatsError::TooFew {
            what: "problems",
            needed: 2,
            got: n,
        });
    }
    let k = cell_means[0].len();
    if k < 2 {
        return Err(StatsError::TooFew {
            what: "algorithms",
            needed: 2,
            got: k,
        });
    }
    for (row, values) in cell_means.iter().enumerate() {
        if values.len() != k {
            return Err(StatsError::RaggedRow {
                row,
                expected: k,
                got: values.len(),
            });
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::MissingCell { row, col });
        }
    }

    let aligned: Vec<f64> = cell_means
        .iter()
        .flat_map(|row| {
            let mean = row.iter().sum::<f64>() / k as f64;
            row.iter().map(move |v| v - mean)
        })
        .collect();
    let flat = average_ranks(&aligned);
    let ranks: Vec<Vec<f64>> = flat.chunks(k).map(<[f64]>::to_vec).collect();

    let col_totals: Vec<f64> = (0..k).map(|j| ranks.iter().map(|r| r[j]).sum()).collect();
    let row_totals: Vec<f64> = ranks.iter().map(|r| r.iter().sum()).collect();
    let avg_ranks = col_totals.iter().map(|t| t / n as f64).collect();

    let (nf, kf) = (n as f64, k as f64);
    let numerator = (kf - 1.0)
        * (col_totals.iter().map(|t| t * t).sum::<f64>()
            - kf * nf * nf / 4.0 * (kf * nf + 1.0).powi(2));
    let denominator = flat.iter().map(|r| r * r).sum::<f64>()
        - row_totals.iter().map(|t| t * t).sum::<f64>() / kf;
    let statistic = if denominator.abs() <= f64::EPSILON * flat.len() as f64 {
        0.0
    } else {
        (numerator / denominator).max(0.0)
    };
    let chi = ChiSquared::new(kf - 1.0).expect("k >= 2 gives positive degrees of freedom");
    let p_value = chi.sf(statistic);
    Ok(AlignedRanks {
        avg_ranks,
        ranks,
        statistic,
        p_value,
    })
}

/// Final outcome of one run, as it enters the tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub f: f64,
    pub phi: f64,
}

impl RunOutcome {
    pub fn is_feasible(&self) -> bool {
        self.phi == 0.0
    }
}

/// Problems x algorithms table of per-run outcomes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTable {
    pub problems: Vec<String>,
    pub algorithms: Vec<String>,
    /// `cells[problem][algorithm]`
    pub cells: Vec<Vec<Vec<RunOutcome>>>,
}

/// Value fed to the ranking for one cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub value: f64,
    /// `true` when no run was feasible and `value` is the mean violation.
    pub from_violation: bool,
}

impl RunTable {
    pub fn new(problems: Vec<String>, algorithms: Vec<String>) -> Self {
        let cells = vec![vec![Vec::new(); algorithms.len()]; problems.len()];
        Self {
            problems,
            algorithms,
            cells,
        }
    }

    pub fn push(&mut self, problem: usize, algorithm: usize, outcome: RunOutcome) {
        self.cells[problem][algorithm].push(outcome);
    }

    /// Feasible-run objective mean, or mean violation when no run was feasible.
    pub fn cell_mean(&self, problem: usize, algorithm: usize) -> Option<CellMean> {
        let runs = &self.cells[problem][algorithm];
        if runs.is_empty() {
            return None;
        }
        let feasible: Vec<f64> = runs
            .iter()
            .filter(|r| r.is_feasible())
            .map(|r| r.f)
            .collect();
        Some(if feasible.is_empty() {
            CellMean {
                value: runs.iter().map(|r| r.phi).sum::<f64>() / runs.len() as f64,
                from_violation: true,
            }
        } else {
            CellMean {
                value: feasible.iter().sum::<f64>() / feasible.len() as f64,
                from_violation: false,
            }
        })
    }

    /// Matrix for [`friedman_aligned`]; `None` if any cell is empty.
    pub fn cell_means(&self) -> Option<Vec<Vec<CellMean>>> {
        (0..self.problems.len())
            .map(|p| {
                (0..self.algorithms.len())
                    .map(|a| self.cell_mean(p, a))
                    .collect()
            })
            .collect()
    }

    /// Run counts agree within every row.
    pub fn is_balanced(&self) -> bool {
        self.cells
            .iter()
            .all(|row| row.windows(2).all(|w| w[0].len() == w[1].len()))
    }
}
