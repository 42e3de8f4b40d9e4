//! Success-history memories for the scale factor `F` and crossover rate `CR`.
//!
//! Each strategy owns `H` cells for `M_F` and `M_CR`, initialised to 0.5. A
//! trial samples its parameters around a random cell; parameters of trials
//! that replaced their parent are collected during the generation and folded
//! into the cell under the write pointer when the generation ends.

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};

use super::StrategyId;
use crate::error::DeError;

/// Default number of cells per memory.
pub const DEFAULT_MEMORY_SIZE: usize = 5;

const INITIAL_CELL: f64 = 0.5;
const SCALE: f64 = 0.1;

/// Memories and per-generation success sets of one strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessMemory {
    m_f: Vec<f64>,
    m_cr: Vec<f64>,
    write_pointer: usize,
    s_f: Vec<f64>,
    s_cr: Vec<f64>,
    deltas: Vec<f64>,
}

impl SuccessMemory {
    pub fn new(size: usize) -> Result<Self, DeError> {
        if size == 0 {
            return Err(DeError::EmptyMemory);
        }
        Ok(Self {
            m_f: vec![INITIAL_CELL; size],
            m_cr: vec![INITIAL_CELL; size],
            write_pointer: 0,
            s_f: Vec::new(),
            s_cr: Vec::new(),
            deltas: Vec::new(),
        })
    }

    pub fn size(&self) -> usize {
        self.m_f.len()
    }

    pub fn m_f(&self) -> &[f64] {
        &self.m_f
    }

    pub fn m_cr(&self) -> &[f64] {
        &self.m_cr
    }

    /// Zero-based index of the cell the next update writes to.
    pub fn write_pointer(&self) -> usize {
        self.write_pointer
    }

    pub fn successful_f(&self) -> &[f64] {
        &self.s_f
    }

    pub fn successful_cr(&self) -> &[f64] {
        &self.s_cr
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// Draws `(F, CR)` around a uniformly chosen cell.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let cell = rng.random_range(0..self.size());
        let cauchy = Cauchy::new(self.m_f[cell], SCALE).expect("cell value is finite");
        let f = loop {
            if let Some(f) = finalize_f(cauchy.sample(rng)) {
                break f;
            }
        };
        let normal = Normal::new(self.m_cr[cell], SCALE).expect("cell value is finite");
        let cr = truncate_cr(normal.sample(rng));
        (f, cr)
    }

    /// Stores the parameters of a trial that replaced its parent.
    pub fn record_success(&mut self, f: f64, cr: f64, delta: f64) -> Result<(), DeError> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(DeError::NegativeDelta(delta));
        }
        self.s_f.push(f);
        self.s_cr.push(cr);
        self.deltas.push(delta);
        Ok(())
    }

    /// Folds this generation's successes into the memory and clears them.
    ///
    /// Returns `true` if a cell was written (and the pointer advanced).
    pub fn update(&mut self) -> bool {
        let changed = !self.s_f.is_empty();
        if changed {
            let weights = success_weights(&self.deltas);
            self.m_f[self.write_pointer] = lehmer_mean(&self.s_f, &weights);
            self.m_cr[self.write_pointer] = weighted_mean(&self.s_cr, &weights);
            self.write_pointer = (self.write_pointer + 1) % self.size();
        }
        self.clear_successes();
        changed
    }

    pub fn clear_successes(&mut self) {
        self.s_f.clear();
        self.s_cr.clear();
        self.deltas.clear();
    }
}

/// Applies the `F` sampling rule to a raw Cauchy draw: non-positive draws are
/// rejected (`None`, draw again) and values above one are clamped to one.
pub fn finalize_f(raw: f64) -> Option<f64> {
    if raw.is_nan() || raw <= 0.0 {
        None
    } else {
        Some(raw.min(1.0))
    }
}

/// Truncates a raw Gaussian draw into `[0, 1]`.
pub fn truncate_cr(raw: f64) -> f64 {
    raw.clamp(0.0, 1.0)
}

/// Normalised improvement weights `delta_t / sum(delta)`.
///
/// When every improvement is zero (ties only) the weights are uniform.
pub fn success_weights(deltas: &[f64]) -> Vec<f64> {
    let total: f64 = deltas.iter().sum();
    if total > 0.0 {
        deltas.iter().map(|d| d / total).collect()
    } else {
        vec![1.0 / deltas.len() as f64; deltas.len()]
    }
}

/// Weighted Lehmer mean `sum(w s^2) / sum(w s)`.
pub fn lehmer_mean(values: &[f64], weights: &[f64]) -> f64 {
    let (num, den) = values
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(num, den), (&s, &w)| {
            (num + w * s * s, den + w * s)
        });
    clamp_to_range(num / den, values)
}

/// Weighted arithmetic mean `sum(w s)` for weights summing to one.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    clamp_to_range(
        values.iter().zip(weights).map(|(&s, &w)| w * s).sum(),
        values,
    )
}

// Both means lie in [min, max] exactly; rounding can push them an ulp out.
fn clamp_to_range(mean: f64, values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mean.is_nan() || lo > hi {
        mean
    } else {
        mean.clamp(lo, hi)
    }
}

/// One [`SuccessMemory`] per strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterMemory {
    per_strategy: [SuccessMemory; 3],
}

impl ParameterMemory {
    pub fn new(size: usize) -> Result<Self, DeError> {
        let m = SuccessMemory::new(size)?;
        Ok(Self {
            per_strategy: [m.clone(), m.clone(), m],
        })
    }

    pub fn strategy(&self, id: StrategyId) -> &SuccessMemory {
        &self.per_strategy[id.index()]
    }

    pub fn sample_parameters<R: Rng + ?Sized>(&self, id: StrategyId, rng: &mut R) -> (f64, f64) {
        self.per_strategy[id.index()].sample(rng)
    }

    pub fn record_success(
        &mut self,
        id: StrategyId,
        f: f64,
        cr: f64,
        delta: f64,
    ) -> Result<(), DeError> {
        self.per_strategy[id.index()].record_success(f, cr, delta)
    }

    /// End-of-generation update of all three strategies.
    pub fn update_all(&mut self) {
        for m in &mut self.per_strategy {
            m.update();
        }
    }

    pub fn update_memory(&mut self, id: StrategyId) -> bool {
        self.per_strategy[id.index()].update()
    }

    pub fn begin_generation(&mut self) {
        for m in &mut self.per_strategy {
            m.clear_successes();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn f_rule_clamps_and_rejects() {
        assert_eq!(finalize_f(1.7), Some(1.0));
        assert_eq!(finalize_f(-0.3), None);
        assert_eq!(finalize_f(0.0), None);
        assert_eq!(finalize_f(0.42), Some(0.42));
        assert_eq!(finalize_f(f64::NAN), None);
    }

    #[test]
    fn cr_rule_truncates() {
        assert_eq!(truncate_cr(-0.2), 0.0);
        assert_eq!(truncate_cr(1.3), 1.0);
        assert_eq!(truncate_cr(0.7), 0.7);
    }

    #[test]
    fn weights_from_improvements() {
        assert_eq!(success_weights(&[1.0, 3.0]), vec![0.25, 0.75]);
        assert_eq!(success_weights(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn lehmer_and_arithmetic_means() {
        let l = lehmer_mean(&[0.5, 1.0], &[0.5, 0.5]);
        assert!((l - 0.625 / 0.75).abs() < 1e-15);
        assert!((weighted_mean(&[0.2, 0.8], &[0.25, 0.75]) - 0.65).abs() < 1e-15);
    }

    #[test]
    fn record_success_rejects_negative_delta() {
        let mut m = SuccessMemory::new(3).unwrap();
        assert!(m.record_success(0.5, 0.5, -1.0).is_err());
        m.record_success(0.5, 0.5, 0.8).unwrap();
        m.record_success(0.5, 0.5, 0.0).unwrap();
        assert_eq!(m.deltas(), &[0.8, 0.0]);
        assert!(SuccessMemory::new(0).is_err());
    }

    #[test]
    fn update_writes_current_cell_and_wraps() {
        let mut m = SuccessMemory::new(2).unwrap();
        assert!(!m.update());
        assert_eq!(m.write_pointer(), 0);

        m.record_success(0.5, 0.2, 1.0).unwrap();
        m.record_success(1.0, 0.8, 3.0).unwrap();
        assert!(m.update());
        let w = [0.25, 0.75];
        let expected_f = (w[0] * 0.25 + w[1] * 1.0) / (w[0] * 0.5 + w[1] * 1.0);
        assert!((m.m_f()[0] - expected_f).abs() < 1e-15);
        assert!((m.m_cr()[0] - 0.65).abs() < 1e-15);
        assert_eq!(m.write_pointer(), 1);
        assert!(m.successful_f().is_empty() && m.deltas().is_empty());

        m.record_success(0.3, 0.3, 0.0).unwrap();
        m.update();
        assert_eq!(m.write_pointer(), 0);
        assert!((m.m_f()[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn sampled_parameters_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut m = SuccessMemory::new(5).unwrap();
        // A memory pulled to the edges exercises both clamps.
        m.record_success(1.0, 1.0, 1.0).unwrap();
        m.update();
        m.record_success(0.01, 0.0, 1.0).unwrap();
        m.update();
        for _ in 0..50_000 {
            let (f, cr) = m.sample(&mut rng);
            assert!(f > 0.0 && f <= 1.0);
            assert!((0.0..=1.0).contains(&cr));
        }
    }

    proptest! {
        #[test]
        fn memory_cells_stay_in_range(
            batches in prop::collection::vec(
                prop::collection::vec((0.001f64..=1.0, 0.0f64..=1.0, 0.0f64..100.0), 0..12),
                1..20,
            )
        ) {
            let mut m = SuccessMemory::new(4).unwrap();
            for batch in batches {
                let lo = batch.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
                let hi = batch.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
                let cell = m.write_pointer();
                for &(f, cr, d) in &batch {
                    m.record_success(f, cr, d).unwrap();
                }
                let wrote = m.update();
                prop_assert_eq!(wrote, !batch.is_empty());
                if wrote {
                    let mf = m.m_f()[cell];
                    prop_assert!(mf >= lo * (1.0 - 1e-12) && mf <= hi * (1.0 + 1e-12));
                }
                prop_assert!(m.m_f().iter().all(|&v| v > 0.0 && v <= 1.0));
                prop_assert!(m.m_cr().iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }
}
