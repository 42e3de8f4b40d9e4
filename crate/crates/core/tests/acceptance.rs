//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ppsde::cli::{execute, ExperimentSpec, Overrides};
use ppsde::comparator::{pull_select, sf_verdict};
use ppsde::de::{lehmer_mean, success_weights, weighted_mean, StrategyId, SuccessMemory};
use ppsde::optimizer::{run, Algorithm, RunConfig, RunResult, Solver};
use ppsde::pps::{Phase, SwitchState, DEFAULT_DELTA, DEFAULT_SWITCH_THRESHOLD};
use ppsde::problem::{make_suite_problem, Evaluation, Problem, SuiteId};
use ppsde::report::write_trace;
use ppsde::stats::friedman_aligned;

const RUNS: u64 = 25;
const DIM: usize = 10;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn seeds() -> impl ParallelIterator<Item = u64> {
    (1..=RUNS).into_par_iter()
}

fn batch(problem: &Problem, algorithm: Algorithm) -> Vec<RunResult> {
    seeds()
        .map(|seed| {
            let config = RunConfig::for_dim(problem.dim())
                .with_algorithm(algorithm)
                .with_seed(seed);
            run(problem, config).expect("run succeeds")
        })
        .collect()
}

fn successes(results: &[RunResult], optimum: f64, tol: f64) -> usize {
    results
        .iter()
        .filter(|r| r.best.is_feasible() && (r.best.f() - optimum).abs() <= tol)
        .count()
}

fn suite_convergence(runs: &mut Vec<(RunConfig, RunResult)>) -> Outcome {
    let mut details = Vec::new();
    let mut failed = false;
    for id in [SuiteId::P1, SuiteId::P2, SuiteId::P3, SuiteId::P5] {
        let problem = make_suite_problem(id, DIM).unwrap();
        let results = batch(&problem, Algorithm::PpsDe);
        let hits = successes(&results, problem.known_optimum().unwrap(), 1e-6);
        failed |= hits < 24;
        details.push(format!("{}: {hits}/25", id.short_name()));
        for (seed, r) in (1..=RUNS).zip(results) {
            runs.push((RunConfig::for_dim(DIM).with_seed(seed), r));
        }
    }
    let text = details.join(", ");
    if failed {
        Err(format!("{text} (need >= 24 each)"))
    } else {
        Ok(text)
    }
}

fn push_stage_value(runs: &mut Vec<(RunConfig, RunResult)>) -> Outcome {
    let problem = make_suite_problem(SuiteId::P4, DIM).unwrap();
    let pps = batch(&problem, Algorithm::PpsDe);
    let sf = batch(&problem, Algorithm::SfDe);
    let pps_hits = successes(&pps, 0.0, 1e-6);
    let sf_hits = successes(&sf, 0.0, 1e-6);
    for (seed, r) in (1..=RUNS).zip(pps) {
        runs.push((RunConfig::for_dim(DIM).with_seed(seed), r));
    }
    for (seed, r) in (1..=RUNS).zip(sf) {
        runs.push((
            RunConfig::for_dim(DIM)
                .with_algorithm(Algorithm::SfDe)
                .with_seed(seed),
            r,
        ));
    }
    let text = format!("pps-de {pps_hits}/25, sf-de {sf_hits}/25");
    if pps_hits >= 20 && pps_hits >= sf_hits {
        Ok(text)
    } else {
        Err(text)
    }
}

fn random_eval(rng: &mut ChaCha8Rng) -> Evaluation {
    let f = rng.random_range(-10.0..10.0);
    let phi = if rng.random_bool(0.3) {
        0.0
    } else {
        rng.random_range(1e-9..5.0)
    };
    Evaluation {
        f,
        g_values: vec![phi],
        h_values: vec![],
        phi,
    }
}

fn epsilon_zero_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pairs = 100_000;
    let mut disagreements = 0;
    let mut accepted = 0;
    for _ in 0..pairs {
        let parent = random_eval(&mut rng);
        let mut trial = random_eval(&mut rng);
        // Exercise ties on either key too.
        if rng.random_bool(0.1) {
            trial.f = parent.f;
        }
        if rng.random_bool(0.1) {
            trial.phi = parent.phi;
            trial.g_values = parent.g_values.clone();
        }
        let sf = sf_verdict(&parent, &trial).accepted();
        let pull = pull_select(&parent, &trial, 0.0);
        accepted += sf as usize;
        disagreements += (sf != pull) as usize;
    }
    let text = format!("{pairs} pairs, {accepted} accepted, {disagreements} disagreements");
    if disagreements == 0 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn check_fes_ledger(config: &RunConfig, result: &RunResult) -> Result<(), String> {
    let n = config.pop_size as u64;
    ensure(config.top_size * 2 == config.pop_size, || {
        "config does not have T = N/2".into()
    })?;
    for row in &result.trace {
        let expected = n + 2 * n * row.generation as u64;
        ensure(row.fes == expected, || {
            format!(
                "N={n} G={}: recorded {} expected {expected}",
                row.generation, row.fes
            )
        })?;
    }
    ensure(
        result.final_fes <= config.max_fes && result.final_fes + 2 * n > config.max_fes,
        || {
            format!(
                "N={n}: final FES {} with budget {}",
                result.final_fes, config.max_fes
            )
        },
    )
}

fn fes_ledger(runs: &[(RunConfig, RunResult)]) -> Outcome {
    let mut checked = 0;
    for (config, result) in runs {
        check_fes_ledger(config, result)?;
        checked += 1;
    }
    let extra = [
        (SuiteId::P2, 2, 8, 1_003),
        (SuiteId::P3, 5, 30, 7_777),
        (SuiteId::P4, 7, 36, 20_000),
        (SuiteId::P5, 3, 8, 999),
    ];
    for (id, dim, pop, max_fes) in extra {
        let problem = make_suite_problem(id, dim).unwrap();
        for algorithm in [Algorithm::PpsDe, Algorithm::SfDe, Algorithm::EpsDe] {
            let mut config = RunConfig::for_dim(dim)
                .with_algorithm(algorithm)
                .with_seed(9);
            config.pop_size = pop;
            config.top_size = pop / 2;
            config.max_fes = max_fes;
            let result = run(&problem, config.clone()).map_err(|e| e.to_string())?;
            check_fes_ledger(&config, &result)?;
            checked += 1;
        }
    }
    Ok(format!("{checked} traces satisfy FES = N + 2NG"))
}

fn check_phases(config: &RunConfig, result: &RunResult) -> Result<usize, String> {
    let tc = config.effective_tc();
    let mut in_pull = false;
    let mut zero_checks = 0;
    for row in &result.trace {
        match row.phase {
            Phase::Push => ensure(!in_pull, || {
                format!("push after pull at G={}", row.generation)
            })?,
            Phase::Pull => in_pull = true,
        }
        ensure(row.eps >= 0.0, || {
            format!("negative eps at G={}", row.generation)
        })?;
        if row.phase == Phase::Pull && row.generation > 0 && config.algorithm != Algorithm::SfDe {
            // k counts pull generations from 0.
            let start = result.switch_generation.unwrap_or(0);
            let k = row.generation - start - 1;
            if k >= tc {
                ensure(row.eps == 0.0, || {
                    format!("eps {} at k={k} >= Tc={tc}", row.eps)
                })?;
                zero_checks += 1;
            }
        }
    }
    if config.algorithm == Algorithm::PpsDe {
        let first_pull = result
            .trace
            .iter()
            .find(|r| r.phase == Phase::Pull)
            .map(|r| r.generation);
        ensure(
            first_pull == result.switch_generation.map(|g| g + 1),
            || {
                format!(
                    "first pull generation {first_pull:?} vs switch {:?}",
                    result.switch_generation
                )
            },
        )?;
    }
    Ok(zero_checks)
}

fn phase_and_schedule(runs: &[(RunConfig, RunResult)]) -> Outcome {
    let mut traces = 0;
    let mut zero_checks = 0;
    for (config, result) in runs {
        zero_checks += check_phases(config, result)?;
        traces += 1;
    }
    // Short Tc so the tail of the schedule is reached many times.
    for id in [SuiteId::P2, SuiteId::P3, SuiteId::P4, SuiteId::P5] {
        let problem = make_suite_problem(id, 5).unwrap();
        for algorithm in [Algorithm::PpsDe, Algorithm::EpsDe] {
            for seed in 0..4 {
                let mut config = RunConfig::for_dim(5)
                    .with_algorithm(algorithm)
                    .with_seed(seed);
                config.max_fes = 30_000;
                config.tc = Some(40);
                let result = run(&problem, config.clone()).map_err(|e| e.to_string())?;
                zero_checks += check_phases(&config, &result)?;
                traces += 1;
            }
        }
    }
    ensure(zero_checks > 0, || "no generation reached k >= Tc".into())?;

    let l = 25;
    let mut switch = SwitchState::new(l, DEFAULT_SWITCH_THRESHOLD, DEFAULT_DELTA);
    let mut fired = None;
    for g in 0..3 * l {
        switch.update_rate(g, 3.25);
        if switch.should_switch() && fired.is_none() {
            fired = Some(g);
        }
    }
    ensure(fired == Some(l), || {
        format!("constant stream switched at {fired:?}")
    })?;

    let flat = Problem::builder("flat", vec![-1.0; 4], vec![1.0; 4], |_| 3.25)
        .inequality(|x| x[0])
        .build()
        .unwrap();
    let mut config = RunConfig::for_dim(4).with_seed(5);
    config.max_fes = 10_000;
    let result = run(&flat, config).map_err(|e| e.to_string())?;
    ensure(result.switch_generation == Some(l), || {
        format!(
            "constant objective run switched at {:?}",
            result.switch_generation
        )
    })?;
    Ok(format!(
        "{traces} traces push*pull*, {zero_checks} rows with k >= Tc at eps 0, constant stream switches at G = {l}"
    ))
}

fn read_tree(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn determinism() -> Outcome {
    let problem = make_suite_problem(SuiteId::P4, 6).unwrap();
    let config = RunConfig::for_dim(6).with_seed(77);
    let csv = |r: &RunResult| {
        let mut buf = Vec::new();
        write_trace(&r.trace, &mut buf).unwrap();
        buf
    };
    let a = csv(&run(&problem, config.clone()).map_err(|e| e.to_string())?);
    let b = csv(&run(&problem, config).map_err(|e| e.to_string())?);
    ensure(a == b, || "trace CSV differs between two runs".into())?;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut spec = ExperimentSpec::new(
        vec![SuiteId::P2, SuiteId::P4],
        vec![Algorithm::PpsDe, Algorithm::SfDe],
        tmp.path().join("first"),
    );
    spec.dims = vec![4];
    spec.runs = 2;
    spec.base_seed = 11;
    spec.overrides = Overrides {
        max_fes: Some(8_000),
        ..Overrides::default()
    };
    execute(&spec).map_err(|e| e.to_string())?;
    let first = read_tree(&spec.out_dir);
    spec.out_dir = tmp.path().join("second");
    execute(&spec).map_err(|e| e.to_string())?;
    let second = read_tree(&spec.out_dir);
    ensure(first == second, || {
        "batch outputs differ between executions".into()
    })?;
    ensure(first.iter().any(|(n, _)| n == "summary.json"), || {
        "summary.json missing".into()
    })?;
    Ok(format!(
        "single-run CSV identical, {} batch files byte-identical",
        first.len()
    ))
}

/// Brute-force rank: 1 + #smaller + (#equal - 1) / 2.
fn oracle_rank(values: &[f64], v: f64) -> f64 {
    let smaller = values.iter().filter(|&&w| w < v).count();
    let equal = values.iter().filter(|&&w| w == v).count();
    1.0 + smaller as f64 + (equal as f64 - 1.0) / 2.0
}

fn friedman_oracle() -> Outcome {
    let example = friedman_aligned(&[vec![1.0, 2.0], vec![3.0, 5.0]]).map_err(|e| e.to_string())?;
    ensure(example.avg_ranks == vec![1.5, 3.5], || {
        format!("2x2 avg ranks {:?}", example.avg_ranks)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, k) = (5usize, 3usize);
    let trials = 2_000;
    for t in 0..trials {
        // Half the matrices use small integers so ties are common.
        let m: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..k)
                    .map(|_| {
                        if t % 2 == 0 {
                            rng.random_range(0..4) as f64
                        } else {
                            rng.random_range(-100.0..100.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let got = friedman_aligned(&m).map_err(|e| e.to_string())?;
        let aligned: Vec<f64> = m
            .iter()
            .flat_map(|row| {
                let mean = row.iter().sum::<f64>() / k as f64;
                row.iter().map(move |v| v - mean).collect::<Vec<_>>()
            })
            .collect();
        let mut col_totals = vec![0.0; k];
        for (idx, &v) in aligned.iter().enumerate() {
            let r = oracle_rank(&aligned, v);
            ensure(got.ranks[idx / k][idx % k] == r, || {
                format!("matrix {t}: rank mismatch at {idx}")
            })?;
            col_totals[idx % k] += r;
        }
        let expected: Vec<f64> = col_totals.iter().map(|c| c / n as f64).collect();
        ensure(got.avg_ranks == expected, || {
            format!("matrix {t}: {:?} vs {expected:?}", got.avg_ranks)
        })?;
        let total: f64 = got.ranks.iter().flatten().sum();
        let nk = (n * k) as f64;
        ensure(total == nk * (nk + 1.0) / 2.0, || {
            format!("matrix {t}: rank sum {total}")
        })?;
    }
    Ok(format!(
        "2x2 gives (1.5, 3.5); {trials} random 5x3 matrices match the oracle, rank sum 120"
    ))
}

fn memory_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut memory = SuccessMemory::new(5).map_err(|e| e.to_string())?;
    let draws_per_batch = 1_000;
    let batches = 1_000;
    let mut worst_weight_error: f64 = 0.0;
    for batch in 0..batches {
        let count = rng.random_range(0..40);
        let mut fs = Vec::new();
        let mut deltas = Vec::new();
        for _ in 0..count {
            let (f, cr) = memory.sample(&mut rng);
            // Some batches have all-zero improvements.
            let delta = if batch % 10 == 0 {
                0.0
            } else {
                rng.random_range(0.0f64..1e3).powi(3)
            };
            memory
                .record_success(f, cr, delta)
                .map_err(|e| e.to_string())?;
            fs.push(f);
            deltas.push(delta);
        }
        if count > 0 {
            let w = success_weights(&deltas);
            worst_weight_error = worst_weight_error.max((w.iter().sum::<f64>() - 1.0).abs());
            let lm = lehmer_mean(&fs, &w);
            let lo = fs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ensure(lo <= lm && lm <= hi, || {
                format!("Lehmer mean {lm} outside [{lo}, {hi}]")
            })?;
            let wm = weighted_mean(&fs, &w);
            ensure(lo <= wm && wm <= hi, || {
                format!("weighted mean {wm} outside [{lo}, {hi}]")
            })?;
        }
        memory.update();
        for _ in 0..draws_per_batch {
            let (f, cr) = memory.sample(&mut rng);
            ensure(f > 0.0 && f <= 1.0, || format!("F = {f}"))?;
            ensure((0.0..=1.0).contains(&cr), || format!("CR = {cr}"))?;
        }
    }
    ensure(worst_weight_error <= 1e-12, || {
        format!("weight sum off by {worst_weight_error:e}")
    })?;
    Ok(format!(
        "{} draws in range, weight sums within {worst_weight_error:.1e} of 1",
        draws_per_batch * batches
    ))
}

fn forced_winner() -> Outcome {
    let problem = make_suite_problem(SuiteId::P5, DIM).unwrap();
    let mut details = Vec::new();
    for (strategy, target) in [
        (StrategyId::Rand1Bin, [1.0, 0.0, 0.0]),
        (StrategyId::CurrentToRand1, [0.0, 0.0, 1.0]),
    ] {
        let mut config = RunConfig::for_dim(DIM).with_seed(3);
        config.max_fes = 30_000;
        let l = config.learning_period;
        let bottom = config.pop_size - config.top_size;
        let result = Solver::new(&problem, config)
            .with_forced_winner(strategy)
            .run()
            .map_err(|e| e.to_string())?;
        let converged = result
            .trace
            .iter()
            .skip(1)
            .find(|r| r.success_rates == target)
            .map(|r| r.generation)
            .ok_or_else(|| format!("{strategy}: SR never reached {target:?}"))?;
        ensure(converged <= l + 1, || {
            format!("{strategy}: SR reached {target:?} at G={converged}")
        })?;
        let mut expected_picks = [0; 3];
        expected_picks[strategy.index()] = bottom;
        for row in result.trace.iter().filter(|r| r.generation >= converged) {
            ensure(row.success_rates == target, || {
                format!(
                    "{strategy}: SR {:?} at G={}",
                    row.success_rates, row.generation
                )
            })?;
            ensure(row.bottom_picks == expected_picks, || {
                format!(
                    "{strategy}: bottom picks {:?} at G={}",
                    row.bottom_picks, row.generation
                )
            })?;
        }
        details.push(format!("{strategy} SR {target:?} from G={converged}"));
    }
    Ok(details.join("; "))
}

fn check(number: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {number} {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL criterion {number} {name}: {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut runs = Vec::new();
    let results = [
        check(1, "suite convergence", || suite_convergence(&mut runs)),
        check(2, "push stage on disconnected regions", || {
            push_stage_value(&mut runs)
        }),
        check(
            3,
            "eps = 0 matches feasibility rules",
            epsilon_zero_equivalence,
        ),
        check(4, "FES ledger", || fes_ledger(&runs)),
        check(5, "parameter memory", memory_properties),
        check(6, "phase order and eps schedule", || {
            phase_and_schedule(&runs)
        }),
        check(7, "determinism", determinism),
        check(8, "aligned-ranks oracle", friedman_oracle),
        check(9, "forced strategy adaptation", forced_winner),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
