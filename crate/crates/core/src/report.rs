//! On-disk formats: per-run trace CSVs, the batch summary JSON and the
//! aligned-ranks report.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::optimizer::{RunResult, TraceRecord};
use crate::pps::Phase;
use crate::stats::{summarize, AlignedRanks, RunOutcome, SIGNIFICANCE};

pub const TRACE_HEADER: [&str; 9] = [
    "generation",
    "fes",
    "best_f",
    "best_phi",
    "phase",
    "eps_k",
    "sr1",
    "sr2",
    "sr3",
];

/// One parsed trace row.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub generation: usize,
    pub fes: u64,
    pub best_f: f64,
    pub best_phi: f64,
    pub phase: Phase,
    pub eps_k: f64,
    pub sr: [f64; 3],
}

impl From<&TraceRecord> for TraceRow {
    fn from(r: &TraceRecord) -> Self {
        Self {
            generation: r.generation,
            fes: r.fes,
            best_f: r.best_f,
            best_phi: r.best_phi,
            phase: r.phase,
            eps_k: r.eps,
            sr: r.success_rates,
        }
    }
}

/// Writes the trace as CSV. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_trace<W: Write>(trace: &[TraceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record([
            r.generation.to_string(),
            r.fes.to_string(),
            r.best_f.to_string(),
            r.best_phi.to_string(),
            r.phase.as_str().to_string(),
            r.eps.to_string(),
            r.success_rates[0].to_string(),
            r.success_rates[1].to_string(),
            r.success_rates[2].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum TraceParseError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("row {row}: cannot parse column '{column}' from '{value}'")]
    Field {
        row: usize,
        column: &'static str,
        value: String,
    },
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, TraceParseError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(TraceParseError::Header(header));
    }
    let mut rows = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<&str, TraceParseError> {
            record.get(i).ok_or_else(|| TraceParseError::Field {
                row,
                column: TRACE_HEADER[i],
                value: String::new(),
            })
        };
        let parse_f = |i: usize| -> Result<f64, TraceParseError> {
            let s = field(i)?;
            s.parse().map_err(|_| TraceParseError::Field {
                row,
                column: TRACE_HEADER[i],
                value: s.to_string(),
            })
        };
        let parse_u = |i: usize| -> Result<u64, TraceParseError> {
            let s = field(i)?;
            s.parse().map_err(|_| TraceParseError::Field {
                row,
                column: TRACE_HEADER[i],
                value: s.to_string(),
            })
        };
        let phase = match field(4)? {
            "push" => Phase::Push,
            "pull" => Phase::Pull,
            other => {
                return Err(TraceParseError::Field {
                    row,
                    column: "phase",
                    value: other.to_string(),
                })
            }
        };
        rows.push(TraceRow {
            generation: parse_u(0)? as usize,
            fes: parse_u(1)?,
            best_f: parse_f(2)?,
            best_phi: parse_f(3)?,
            phase,
            eps_k: parse_f(5)?,
            sr: [parse_f(6)?, parse_f(7)?, parse_f(8)?],
        });
    }
    Ok(rows)
}

/// Statistics of one (problem, dimension, algorithm) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub problem: String,
    pub dim: usize,
    pub algorithm: String,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub known_optimum: Option<f64>,
    pub feasible_runs: usize,
    pub feasibility_rate: f64,
    /// Objective statistics over feasible runs; `null` when none was feasible.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub best: Option<f64>,
    pub worst: Option<f64>,
    pub median: Option<f64>,
    /// Mean final violation over all runs.
    pub violation_mean: f64,
}

impl CellSummary {
    pub fn from_outcomes(
        problem: &str,
        dim: usize,
        algorithm: &str,
        known_optimum: Option<f64>,
        seeds: Vec<u64>,
        outcomes: &[RunOutcome],
    ) -> Self {
        let feasible: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.is_feasible())
            .map(|o| o.f)
            .collect();
        let objective = summarize(&feasible).ok();
        let runs = outcomes.len();
        Self {
            problem: problem.to_string(),
            dim,
            algorithm: algorithm.to_string(),
            runs,
            seeds,
            known_optimum,
            feasible_runs: feasible.len(),
            feasibility_rate: if runs == 0 {
                0.0
            } else {
                feasible.len() as f64 / runs as f64
            },
            mean: objective.map(|s| s.mean),
            std: objective.map(|s| s.std),
            best: objective.map(|s| s.best),
            worst: objective.map(|s| s.worst),
            median: objective.map(|s| s.median),
            violation_mean: if runs == 0 {
                0.0
            } else {
                outcomes.iter().map(|o| o.phi).sum::<f64>() / runs as f64
            },
        }
    }
}

/// Whole-batch summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub runs_per_cell: usize,
    pub base_seed: u64,
    pub cells: Vec<CellSummary>,
    /// File name of the aligned-ranks report, or `null` when it was skipped.
    pub friedman_report: Option<String>,
    pub friedman_note: Option<String>,
}

/// Aligned-ranks comparison across the batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FriedmanReport {
    pub significance: f64,
    pub algorithms: Vec<String>,
    pub problems: Vec<String>,
    pub cell_means: Vec<Vec<f64>>,
    /// Cells whose value is a mean violation because no run was feasible.
    pub violation_cells: Vec<(String, String)>,
    pub avg_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

impl FriedmanReport {
    pub fn new(
        algorithms: Vec<String>,
        problems: Vec<String>,
        cell_means: Vec<Vec<f64>>,
        violation_cells: Vec<(String, String)>,
        ranks: &AlignedRanks,
    ) -> Self {
        Self {
            significance: SIGNIFICANCE,
            algorithms,
            problems,
            cell_means,
            violation_cells,
            avg_ranks: ranks.avg_ranks.clone(),
            statistic: ranks.statistic,
            p_value: ranks.p_value,
            significant: ranks.significant(),
        }
    }
}

pub fn outcome(result: &RunResult) -> RunOutcome {
    RunOutcome {
        f: result.best.f(),
        phi: result.best.phi(),
    }
}
