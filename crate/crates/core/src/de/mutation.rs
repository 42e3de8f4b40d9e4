//! Trial-vector generation and bound repair.
//!
//! Every generator reads the population as it stood at the start of the
//! generation and returns a bound-repaired trial vector.

use rand::Rng;

use super::StrategyId;
use crate::error::DeError;

/// Smallest population the strategies accept (target plus three donors).
pub const MIN_POPULATION: usize = 4;

/// Read-only view of the current generation shared by all generators.
#[derive(Clone, Copy, Debug)]
pub struct Generation<'a> {
    /// Decision vectors, indexed like the population.
    pub positions: &'a [Vec<f64>],
    /// Population indices best-first under the feasibility rules.
    pub sf_order: &'a [usize],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub p_fraction: f64,
}

impl Generation<'_> {
    fn check_size(&self) -> Result<(), DeError> {
        if self.positions.len() < MIN_POPULATION {
            Err(DeError::PopulationTooSmall(self.positions.len()))
        } else {
            Ok(())
        }
    }

    /// Generates one trial for `target` with the given strategy.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        strategy: StrategyId,
        target: usize,
        f: f64,
        cr: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>, DeError> {
        match strategy {
            StrategyId::Rand1Bin => generate_rand_1_bin(self, target, f, cr, rng),
            StrategyId::CurrentToPbest1 => generate_current_to_pbest(self, target, f, cr, rng),
            StrategyId::CurrentToRand1 => generate_current_to_rand(self, target, f, rng),
        }
    }
}

/// Draws `count` distinct indices from `0..n`, none equal to `exclude`.
pub fn pick_distinct<R: Rng + ?Sized, const N: usize>(
    n: usize,
    exclude: usize,
    rng: &mut R,
) -> [usize; N] {
    debug_assert!(n > N, "not enough candidates");
    let mut picked = [usize::MAX; N];
    for slot in 0..N {
        picked[slot] = loop {
            let r = rng.random_range(0..n);
            if r != exclude && !picked[..slot].contains(&r) {
                break r;
            }
        };
    }
    picked
}

/// Binomial crossover: coordinate `j` comes from the donor when `j == j_rand`
/// or a uniform draw falls below `cr`.
pub fn binomial_crossover<R: Rng + ?Sized>(
    target: &[f64],
    donor: &[f64],
    cr: f64,
    rng: &mut R,
) -> Vec<f64> {
    let j_rand = rng.random_range(0..target.len());
    target
        .iter()
        .zip(donor)
        .enumerate()
        .map(|(j, (&t, &d))| {
            let from_donor = rng.random::<f64>() < cr;
            if j == j_rand || from_donor {
                d
            } else {
                t
            }
        })
        .collect()
}

/// Out-of-box coordinates move halfway between the violated bound and the parent.
pub fn repair_bounds(
    mut candidate: Vec<f64>,
    parent: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Vec<f64> {
    for (((c, &p), &lo), &hi) in candidate.iter_mut().zip(parent).zip(lower).zip(upper) {
        if *c < lo {
            *c = (lo + p) / 2.0;
        } else if *c > hi {
            *c = (hi + p) / 2.0;
        }
    }
    candidate
}

/// `max(1, round(p * n))` with halves rounded up, capped at `n`.
pub fn pbest_pool_size(p_fraction: f64, n: usize) -> usize {
    let raw = (p_fraction * n as f64 + 0.5).floor();
    (raw.max(1.0) as usize).min(n)
}

/// DE/rand/1/bin: `v = x_r1 + F (x_r2 - x_r3)`, then binomial crossover.
pub fn generate_rand_1_bin<R: Rng + ?Sized>(
    gen: &Generation<'_>,
    target: usize,
    f: f64,
    cr: f64,
    rng: &mut R,
) -> Result<Vec<f64>, DeError> {
    gen.check_size()?;
    let pop = gen.positions;
    let [r1, r2, r3] = pick_distinct(pop.len(), target, rng);
    let donor: Vec<f64> = (0..pop[target].len())
        .map(|j| pop[r1][j] + f * (pop[r2][j] - pop[r3][j]))
        .collect();
    let trial = binomial_crossover(&pop[target], &donor, cr, rng);
    Ok(repair_bounds(trial, &pop[target], gen.lower, gen.upper))
}

/// DE/current-to-pbest/1: `v = x_i + F (x_pbest - x_i) + F (x_r1 - x_r2)`, then
/// binomial crossover. `pbest` is uniform over the SF-best
/// [`pbest_pool_size`] members.
pub fn generate_current_to_pbest<R: Rng + ?Sized>(
    gen: &Generation<'_>,
    target: usize,
    f: f64,
    cr: f64,
    rng: &mut R,
) -> Result<Vec<f64>, DeError> {
    gen.check_size()?;
    let pop = gen.positions;
    let pool = pbest_pool_size(gen.p_fraction, pop.len());
    let pbest = gen.sf_order[rng.random_range(0..pool)];
    let [r1, r2] = pick_distinct(pop.len(), target, rng);
    let x = &pop[target];
    let donor: Vec<f64> = (0..x.len())
        .map(|j| x[j] + f * (pop[pbest][j] - x[j]) + f * (pop[r1][j] - pop[r2][j]))
        .collect();
    let trial = binomial_crossover(x, &donor, cr, rng);
    Ok(repair_bounds(trial, x, gen.lower, gen.upper))
}

/// DE/current-to-rand/1: `u = x_i + K (x_r1 - x_i) + F (x_r2 - x_r3)` with
/// `K ~ U(0, 1)`; no crossover.
pub fn generate_current_to_rand<R: Rng + ?Sized>(
    gen: &Generation<'_>,
    target: usize,
    f: f64,
    rng: &mut R,
) -> Result<Vec<f64>, DeError> {
    gen.check_size()?;
    let pop = gen.positions;
    let [r1, r2, r3] = pick_distinct(pop.len(), target, rng);
    let k: f64 = rng.random();
    let x = &pop[target];
    let trial = current_to_rand_point(x, &pop[r1], &pop[r2], &pop[r3], k, f);
    Ok(repair_bounds(trial, x, gen.lower, gen.upper))
}

fn current_to_rand_point(x: &[f64], a: &[f64], b: &[f64], c: &[f64], k: f64, f: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| x[j] + k * (a[j] - x[j]) + f * (b[j] - c[j]))
        .collect()
}
