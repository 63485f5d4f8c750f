//! GPS chain: one residual count per batch.
//!
//! A state of `S_b` lists, for every batch `i`, the frames `s_i` of that
//! batch still in service right before batch `b` generates. Inside a block
//! states are ordered lexicographically with batch 0 most significant.

use nalgebra::DMatrix;

use super::{completion_pmf, BatchChain, StateSpace};
use crate::error::Result;
use crate::numerics::{binomial, StochasticMatrix};
use crate::scenario::{Policy, Scenario};

/// Probability that a uniformly random set of `Σ removed` frames, drawn from
/// groups of sizes `available`, takes exactly `removed[i]` from group `i`
/// (multivariate hypergeometric).
pub fn selection_probability(available: &[usize], removed: &[usize]) -> f64 {
    let total: usize = available.iter().sum();
    let drawn: usize = removed.iter().sum();
    if drawn > total || available.iter().zip(removed).any(|(a, d)| d > a) {
        return 0.0;
    }
    let ways: f64 = available.iter().zip(removed).map(|(&a, &d)| binomial(a, d)).product();
    ways / binomial(total, drawn)
}

/// Full GPS state space, `B · Π_b (N_b + 1)` states.
pub fn enumerate_states(scenario: &Scenario) -> Result<StateSpace> {
    Ok(GpsChain::new(scenario)?.space)
}

/// Dense one-step transition matrix over the full GPS state space.
pub fn transition_matrix(scenario: &Scenario) -> Result<StochasticMatrix> {
    super::dense_transition_matrix(&GpsChain::new(scenario)?)
}

pub(crate) struct GpsChain<'a> {
    scenario: &'a Scenario,
    space: StateSpace,
    strides: Vec<usize>,
}

impl<'a> GpsChain<'a> {
    pub(crate) fn new(scenario: &'a Scenario) -> Result<Self> {
        let sizes = scenario.batch_sizes();
        let block = super::checked_block_size(scenario, sizes.iter().map(|&n| n + 1))?;
        let mut strides = vec![1; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * (sizes[i + 1] + 1);
        }
        let labels = (0..block)
            .map(|idx| {
                sizes
                    .iter()
                    .zip(&strides)
                    .map(|(&n, &stride)| (idx / stride) % (n + 1))
                    .collect()
            })
            .collect();
        let space = StateSpace::new(Policy::Gps, scenario.batch_count(), labels);
        Ok(Self { scenario, space, strides })
    }

    fn local_index(&self, counts: &[usize]) -> usize {
        counts.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    /// Frames of each batch active right after batch `current` generates.
    fn active_after(&self, current: usize, local: usize) -> Vec<usize> {
        let mut active = self.space.labels()[local].clone();
        active[current] = self.scenario.batch_size(current);
        active
    }
}

impl BatchChain for GpsChain<'_> {
    fn space(&self) -> &StateSpace {
        &self.space
    }

    fn transition_block(&self, b: usize) -> DMatrix<f64> {
        let m = self.space.block_size();
        let mean = self.scenario.service_rate() * self.scenario.offset(b + 1);
        let pmfs: Vec<Vec<f64>> = (0..=self.scenario.n_clients()).map(|x| completion_pmf(x, mean)).collect();
        let mut block = DMatrix::zeros(m, m);
        let mut removed = vec![0usize; self.scenario.batch_count()];
        for from in 0..m {
            let active = self.active_after(b, from);
            let x: usize = active.iter().sum();
            removed.iter_mut().for_each(|d| *d = 0);
            // Walk every removal vector 0 <= d <= active in mixed radix.
            loop {
                let c: usize = removed.iter().sum();
                let left: Vec<usize> = active.iter().zip(&removed).map(|(a, d)| a - d).collect();
                block[(from, self.local_index(&left))] += pmfs[x][c] * selection_probability(&active, &removed);
                let mut i = removed.len();
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    if removed[i] < active[i] {
                        removed[i] += 1;
                        break;
                    }
                    removed[i] = 0;
                }
                if removed.iter().all(|&d| d == 0) {
                    break;
                }
            }
        }
        block
    }

    fn delivered_fraction(&self, tagged: usize, local: usize) -> f64 {
        let n = self.scenario.batch_size(tagged);
        (n - self.space.labels()[local][tagged]) as f64 / n as f64
    }

    fn service_terms(&self, tagged: usize, k: usize, local: usize, row: &mut [f64]) {
        let n = self.scenario.batch_size(tagged) as f64;
        let current = (tagged + k) % self.scenario.batch_count();
        let active = self.active_after(current, local);
        let x: usize = active.iter().sum();
        let remaining = active[tagged] as f64;
        row.iter_mut().for_each(|v| *v = 0.0);
        row[0] = 1.0 - remaining / n;
        // A remaining tagged frame is equally likely to be any of the next
        // `x` completions.
        for w in &mut row[1..=x] {
            *w = remaining / (n * x as f64);
        }
    }
}
