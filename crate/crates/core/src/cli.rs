//! Batch experiments from the command line: argument parsing, parallel
//! execution of the (problem, dimension, algorithm, run) grid and output
//! files.

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::error::{ProblemError, RunError, StatsError};
use crate::optimizer::{self, Algorithm, RunConfig, RunResult};
use crate::problem::{make_suite_problem_with_sigma, SuiteId, DEFAULT_SIGMA};
use crate::report::{self, BatchSummary, CellSummary, FriedmanReport};
use crate::stats::{friedman_aligned, RunTable};

pub const SUMMARY_FILE: &str = "summary.json";
pub const FRIEDMAN_FILE: &str = "friedman.json";
pub const TRACE_DIR: &str = "traces";
pub const DEFAULT_RUNS: usize = 25;
pub const DEFAULT_DIM: usize = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Args(#[from] clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("{cell}: {source}")]
    Run { cell: String, source: RunError },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Args(e) => e.exit_code(),
            CliError::Usage(_) | CliError::ConfigRead { .. } | CliError::ConfigParse { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ppsde",
    version,
    about = "Constrained differential evolution experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a batch of independent runs and write traces and summaries.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML file with batch settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suite problem (P1..P5 or full name); repeatable or comma separated.
    #[arg(long, value_delimiter = ',')]
    problem: Vec<String>,
    /// Dimension; repeatable or comma separated.
    #[arg(long, value_delimiter = ',')]
    dim: Vec<usize>,
    /// Algorithm (pps-de, sf-de, eps-de); repeatable or comma separated.
    #[arg(long, value_delimiter = ',')]
    algo: Vec<String>,
    /// Independent runs per cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; run i of every cell uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_fes: Option<u64>,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    top: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

/// Per-run settings that override the dimension defaults.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub max_fes: Option<u64>,
    pub pop: Option<usize>,
    pub top: Option<usize>,
    pub learning_period: Option<usize>,
    pub p_fraction: Option<f64>,
    pub memory_size: Option<usize>,
    pub switch_threshold: Option<f64>,
    pub delta: Option<f64>,
    pub theta: Option<f64>,
    pub tau: Option<f64>,
    pub alpha: Option<f64>,
    pub cp: Option<f64>,
    pub tc_fraction: Option<f64>,
    pub tc: Option<usize>,
    pub eps0: Option<f64>,
    pub sigma: Option<f64>,
}

impl Overrides {
    /// Run configuration for one cell. `T` follows `N_P / 2` unless set.
    pub fn config(&self, dim: usize, algorithm: Algorithm, seed: u64) -> RunConfig {
        let mut c = RunConfig::for_dim(dim)
            .with_algorithm(algorithm)
            .with_seed(seed);
        if let Some(pop) = self.pop {
            c.pop_size = pop;
            c.top_size = pop / 2;
        }
        if let Some(v) = self.top {
            c.top_size = v;
        }
        if let Some(v) = self.max_fes {
            c.max_fes = v;
        }
        if let Some(v) = self.learning_period {
            c.learning_period = v;
        }
        if let Some(v) = self.p_fraction {
            c.p_fraction = v;
        }
        if let Some(v) = self.memory_size {
            c.memory_size = v;
        }
        if let Some(v) = self.switch_threshold {
            c.switch_threshold = v;
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.theta {
            c.theta = v;
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.cp {
            c.cp = v;
        }
        if let Some(v) = self.tc_fraction {
            c.tc_fraction = v;
        }
        if self.tc.is_some() {
            c.tc = self.tc;
        }
        if self.eps0.is_some() {
            c.eps0 = self.eps0;
        }
        c
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    problems: Option<Vec<String>>,
    dims: Option<Vec<usize>>,
    algorithms: Option<Vec<String>>,
    runs: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    #[serde(default)]
    run: Overrides,
}

/// A fully resolved batch.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub problems: Vec<SuiteId>,
    pub dims: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub runs: usize,
    pub base_seed: u64,
    pub overrides: Overrides,
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(
        problems: Vec<SuiteId>,
        algorithms: Vec<Algorithm>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            problems,
            dims: vec![DEFAULT_DIM],
            algorithms,
            runs: DEFAULT_RUNS,
            base_seed: 0,
            overrides: Overrides::default(),
            out_dir: out_dir.into(),
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.problems.is_empty() {
            return Err(CliError::Usage(
                "no problem selected (use --problem)".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(CliError::Usage("no algorithm selected (use --algo)".into()));
        }
        if self.dims.is_empty() {
            return Err(CliError::Usage("no dimension selected (use --dim)".into()));
        }
        if let Some(&d) = self.dims.iter().find(|&&d| d < 2) {
            return Err(ProblemError::DimensionTooSmall(d).into());
        }
        if self.runs == 0 {
            return Err(CliError::Usage("--runs must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        for &dim in &self.dims {
            for &algo in &self.algorithms {
                self.overrides
                    .config(dim, algo, self.base_seed)
                    .validate()
                    .map_err(|e| CliError::Usage(format!("D = {dim}: {e}")))?;
            }
        }
        Ok(())
    }

    fn sigma(&self) -> f64 {
        self.overrides.sigma.unwrap_or(DEFAULT_SIGMA)
    }
}

fn parse_list<T, E: std::fmt::Display>(
    items: &[String],
    parse: impl Fn(&str) -> Result<T, E>,
) -> Result<Vec<T>, CliError> {
    items
        .iter()
        .map(|s| parse(s.trim()).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

/// Parses `argv` (including the program name) into a batch specification.
pub fn parse_args<I, T>(argv: I) -> Result<ExperimentSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let Command::Run(args) = cli.command;

    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
                path: path.clone(),
                source,
            })?;
            toml::from_str::<FileConfig>(&text).map_err(|source| CliError::ConfigParse {
                path: path.clone(),
                source,
            })?
        }
        None => FileConfig::default(),
    };

    let problems = if args.problem.is_empty() {
        file.problems.unwrap_or_default()
    } else {
        args.problem
    };
    let algorithms = if args.algo.is_empty() {
        file.algorithms
            .unwrap_or_else(|| vec![Algorithm::PpsDe.as_str().to_string()])
    } else {
        args.algo
    };
    let dims = if args.dim.is_empty() {
        file.dims.unwrap_or_else(|| vec![DEFAULT_DIM])
    } else {
        args.dim
    };

    let mut overrides = file.run;
    if args.max_fes.is_some() {
        overrides.max_fes = args.max_fes;
    }
    if args.pop.is_some() {
        overrides.pop = args.pop;
        // A flag-level N_P resets a T that only came from the file.
        if args.top.is_none() {
            overrides.top = None;
        }
    }
    if args.top.is_some() {
        overrides.top = args.top;
    }

    let spec = ExperimentSpec {
        problems: parse_list(&problems, str::parse::<SuiteId>)?,
        dims,
        algorithms: parse_list(&algorithms, str::parse::<Algorithm>)?,
        runs: args.runs.or(file.runs).unwrap_or(DEFAULT_RUNS),
        base_seed: args.seed.or(file.seed).unwrap_or(0),
        overrides,
        out_dir: args
            .out
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("results")),
        jobs: args.jobs.or(file.jobs),
    };
    spec.validate()?;
    Ok(spec)
}

/// One finished cell of the grid.
#[derive(Clone, Debug)]
pub struct CellRuns {
    pub problem: SuiteId,
    pub dim: usize,
    pub algorithm: Algorithm,
    pub known_optimum: Option<f64>,
    pub results: Vec<RunResult>,
}

impl CellRuns {
    pub fn label(&self) -> String {
        cell_label(self.problem, self.dim, self.algorithm)
    }
}

fn cell_label(problem: SuiteId, dim: usize, algorithm: Algorithm) -> String {
    format!("{}_D{}_{}", problem.short_name(), dim, algorithm)
}

/// Trace file name of run `run` in a cell, relative to the trace directory.
pub fn trace_file_name(problem: SuiteId, dim: usize, algorithm: Algorithm, run: usize) -> String {
    format!("{}_run{:03}.csv", cell_label(problem, dim, algorithm), run)
}

/// What [`execute`] produced.
#[derive(Clone, Debug)]
pub struct ExecutionReport {
    pub cells: Vec<CellRuns>,
    pub summary: BatchSummary,
    pub friedman: Option<FriedmanReport>,
}

/// Runs every cell of the grid and returns the results in grid order
/// without touching the filesystem.
pub fn run_grid(spec: &ExperimentSpec) -> Result<Vec<CellRuns>, CliError> {
    spec.validate()?;
    let mut problems = Vec::new();
    for &id in &spec.problems {
        for &dim in &spec.dims {
            problems.push((
                id,
                dim,
                make_suite_problem_with_sigma(id, dim, spec.sigma())?,
            ));
        }
    }

    let mut jobs = Vec::new();
    for (pi, _) in problems.iter().enumerate() {
        for &algo in &spec.algorithms {
            for run in 0..spec.runs {
                jobs.push((pi, algo, run));
            }
        }
    }

    let work = || {
        jobs.par_iter()
            .map(|&(pi, algo, run)| {
                let (id, dim, problem) = &problems[pi];
                let seed = spec.base_seed.wrapping_add(run as u64);
                let config = spec.overrides.config(*dim, algo, seed);
                optimizer::run(problem, config).map_err(|source| CliError::Run {
                    cell: format!("{} run {run}", cell_label(*id, *dim, algo)),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let results = match spec.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let mut results = results.into_iter();
    let mut cells = Vec::new();
    for (id, dim, problem) in &problems {
        for &algorithm in &spec.algorithms {
            cells.push(CellRuns {
                problem: *id,
                dim: *dim,
                algorithm,
                known_optimum: problem.known_optimum(),
                results: results.by_ref().take(spec.runs).collect(),
            });
        }
    }
    Ok(cells)
}

/// Builds the batch summary and, when there are at least two algorithms and
/// two problem rows, the aligned-ranks report.
pub fn summarize_cells(
    spec: &ExperimentSpec,
    cells: &[CellRuns],
) -> Result<(BatchSummary, Option<FriedmanReport>), CliError> {
    let cell_summaries = cells
        .iter()
        .map(|c| {
            let outcomes: Vec<_> = c.results.iter().map(report::outcome).collect();
            let seeds = c.results.iter().map(|r| r.seed).collect();
            CellSummary::from_outcomes(
                c.problem.full_name(),
                c.dim,
                c.algorithm.as_str(),
                c.known_optimum,
                seeds,
                &outcomes,
            )
        })
        .collect();

    let rows: Vec<String> = spec
        .problems
        .iter()
        .flat_map(|id| {
            spec.dims
                .iter()
                .map(move |d| format!("{}_D{}", id.short_name(), d))
        })
        .collect();
    let algos: Vec<String> = spec
        .algorithms
        .iter()
        .map(|a| a.as_str().to_string())
        .collect();

    let (friedman, note) = if algos.len() >= 2 && rows.len() >= 2 {
        let mut table = RunTable::new(rows.clone(), algos.clone());
        for (i, c) in cells.iter().enumerate() {
            let row = i / algos.len();
            let col = i % algos.len();
            for r in &c.results {
                table.push(row, col, report::outcome(r));
            }
        }
        let means = table.cell_means().ok_or(StatsError::Empty)?;
        let values: Vec<Vec<f64>> = means
            .iter()
            .map(|r| r.iter().map(|c| c.value).collect())
            .collect();
        let mut flagged = Vec::new();
        for (ri, row) in means.iter().enumerate() {
            for (ci, cell) in row.iter().enumerate() {
                if cell.from_violation {
                    flagged.push((rows[ri].clone(), algos[ci].clone()));
                }
            }
        }
        let ranks = friedman_aligned(&values)?;
        (
            Some(FriedmanReport::new(algos, rows, values, flagged, &ranks)),
            None,
        )
    } else {
        (
            None,
            Some(
                "aligned-ranks test skipped: needs at least two algorithms and two problem rows"
                    .to_string(),
            ),
        )
    };

    let summary = BatchSummary {
        runs_per_cell: spec.runs,
        base_seed: spec.base_seed,
        cells: cell_summaries,
        friedman_report: friedman.as_ref().map(|_| FRIEDMAN_FILE.to_string()),
        friedman_note: note,
    };
    Ok((summary, friedman))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Runs the batch and writes traces, `summary.json` and, when applicable,
/// `friedman.json` under the output directory.
pub fn execute(spec: &ExperimentSpec) -> Result<ExecutionReport, CliError> {
    let cells = run_grid(spec)?;
    let (summary, friedman) = summarize_cells(spec, &cells)?;

    let trace_dir = spec.out_dir.join(TRACE_DIR);
    fs::create_dir_all(&trace_dir).map_err(io_err(&trace_dir))?;
    for cell in &cells {
        for (run, result) in cell.results.iter().enumerate() {
            let path = trace_dir.join(trace_file_name(cell.problem, cell.dim, cell.algorithm, run));
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            report::write_trace(&result.trace, BufWriter::new(file)).map_err(|source| {
                CliError::Csv {
                    path: path.clone(),
                    source,
                }
            })?;
        }
    }

    write_json(&spec.out_dir.join(SUMMARY_FILE), &summary)?;
    let friedman_path = spec.out_dir.join(FRIEDMAN_FILE);
    match &friedman {
        Some(report) => write_json(&friedman_path, report)?,
        // Do not leave a stale report from an earlier batch next to the new summary.
        None if friedman_path.exists() => {
            fs::remove_file(&friedman_path).map_err(io_err(&friedman_path))?
        }
        None => {}
    }

    Ok(ExecutionReport {
        cells,
        summary,
        friedman,
    })
}

/// Entry point of the binary. Returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let spec = match parse_args(argv) {
        Ok(spec) => spec,
        Err(CliError::Args(e)) => {
            let _ = e.print();
            return e.exit_code();
        }
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match execute(&spec) {
        Ok(report) => {
            for c in &report.summary.cells {
                let mean = c
                    .mean
                    .map_or_else(|| "n/a".to_string(), |m| format!("{m:.6e}"));
                println!(
                    "{} D={} {}: feasible {}/{} mean {}",
                    c.problem, c.dim, c.algorithm, c.feasible_runs, c.runs, mean
                );
            }
            match (&report.friedman, &report.summary.friedman_note) {
                (Some(f), _) => println!(
                    "aligned ranks {:?}, statistic {:.4}, p = {:.4}",
                    f.avg_ranks, f.statistic, f.p_value
                ),
                (None, Some(note)) => println!("{note}"),
                (None, None) => {}
            }
            println!("results written to {}", spec.out_dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<ExperimentSpec, CliError> {
        let mut argv = vec!["ppsde", "run"];
        argv.extend_from_slice(args);
        parse_args(argv)
    }

    #[test]
    fn defaults() {
        let spec = parse(&["--problem", "P1"]).unwrap();
        assert_eq!(spec.problems, vec![SuiteId::P1]);
        assert_eq!(spec.dims, vec![10]);
        assert_eq!(spec.algorithms, vec![Algorithm::PpsDe]);
        assert_eq!(spec.runs, 25);
        assert_eq!(spec.base_seed, 0);
    }

    #[test]
    fn comma_and_repeat_lists() {
        let spec = parse(&[
            "--problem",
            "P1,p2",
            "--problem",
            "P4-disconnected",
            "--algo",
            "sf-de,eps-de",
        ])
        .unwrap();
        assert_eq!(spec.problems, vec![SuiteId::P1, SuiteId::P2, SuiteId::P4]);
        assert_eq!(spec.algorithms, vec![Algorithm::SfDe, Algorithm::EpsDe]);
    }

    #[test]
    fn zero_runs_is_rejected() {
        let err = parse(&["--problem", "P1", "--runs", "0"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--runs"));
    }

    #[test]
    fn unknown_algorithm_lists_valid_names() {
        let err = parse(&["--problem", "P1", "--algo", "jade"]).unwrap_err();
        let msg = err.to_string();
        for name in ["pps-de", "sf-de", "eps-de"] {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn missing_problem_is_rejected() {
        assert!(matches!(parse(&[]), Err(CliError::Usage(_))));
    }

    #[test]
    fn invalid_top_is_rejected() {
        assert!(parse(&["--problem", "P1", "--pop", "20", "--top", "30"]).is_err());
    }

    #[test]
    fn pop_flag_rescales_top() {
        let spec = parse(&["--problem", "P1", "--pop", "20"]).unwrap();
        let c = spec.overrides.config(10, Algorithm::PpsDe, 0);
        assert_eq!((c.pop_size, c.top_size), (20, 10));
    }

    #[test]
    fn config_file_with_flag_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.toml");
        fs::write(
            &path,
            "problems = [\"P2\", \"P3\"]\ndims = [4]\nruns = 3\nseed = 7\n[run]\nmax_fes = 5000\ntau = 0.2\n",
        )
        .unwrap();
        let spec = parse(&["--config", path.to_str().unwrap(), "--runs", "2"]).unwrap();
        assert_eq!(spec.problems, vec![SuiteId::P2, SuiteId::P3]);
        assert_eq!(spec.dims, vec![4]);
        assert_eq!(spec.runs, 2);
        assert_eq!(spec.base_seed, 7);
        let c = spec.overrides.config(4, Algorithm::PpsDe, 7);
        assert_eq!(c.max_fes, 5000);
        assert_eq!(c.tau, 0.2);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(&path, "problems = [\"P1\"]\npopulation = 10\n").unwrap();
        let err = parse(&["--config", path.to_str().unwrap()]).unwrap_err();
        assert!(matches!(err, CliError::ConfigParse { .. }));
    }

    #[test]
    fn trace_names() {
        assert_eq!(
            trace_file_name(SuiteId::P4, 10, Algorithm::SfDe, 3),
            "P4_D10_sf-de_run003.csv"
        );
    }
}
