//! FIFO chain: only the total backlog matters.
//!
//! Frames present at any instant are always the most recently generated
//! ones, because service follows generation order. A state of `S_b` is the
//! number `s_1` of frames queued right before batch `b` generates.

use nalgebra::DMatrix;

use super::{completion_pmf, BatchChain, StateSpace};
use crate::error::{Error, Result};
use crate::numerics::{erlang_cdfs, StochasticMatrix};
use crate::scenario::{Policy, Scenario};

/// `B (N + 1)` states.
pub fn enumerate_states(scenario: &Scenario) -> Result<StateSpace> {
    Ok(FifoChain::new(scenario)?.space)
}

/// Dense one-step transition matrix over the full FIFO state space.
pub fn transition_matrix(scenario: &Scenario) -> Result<StochasticMatrix> {
    super::dense_transition_matrix(&FifoChain::new(scenario)?)
}

/// `Q_b(b′)`: frames generated after batch `b` up to and including batch
/// `b′`, i.e. queued behind batch `b` once `b′` has generated.
pub fn queue_behind(scenario: &Scenario, b: usize, later: usize) -> usize {
    let count = scenario.batch_count();
    let steps = (later % count + count - b % count) % count;
    (1..=steps).map(|k| scenario.batch_size(b + k)).sum()
}

/// Probability that a given frame of batch `b` is still queued after batch
/// `current` generates in state `backlog` and completes within `t` of that
/// epoch, with no further arrivals in between.
pub fn service_cdf_within_gap(scenario: &Scenario, b: usize, current: usize, backlog: usize, t: f64) -> Result<f64> {
    if backlog > scenario.n_clients() {
        return Err(Error::Domain(format!("backlog {backlog} exceeds {} clients", scenario.n_clients())));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let (ahead, remaining) = tagged_position(scenario, b, current, backlog);
    let cdf = erlang_cdfs(ahead + remaining, scenario.service_rate(), t);
    Ok(cdf[ahead + 1..].iter().sum::<f64>() / scenario.batch_size(b) as f64)
}

/// Frames queued ahead of batch `b`'s survivors, and the number of
/// survivors, once `current` has generated on top of `backlog`.
fn tagged_position(scenario: &Scenario, b: usize, current: usize, backlog: usize) -> (usize, usize) {
    let x = (backlog + scenario.batch_size(current)).min(scenario.n_clients());
    let behind = queue_behind(scenario, b, current);
    let remaining = x.saturating_sub(behind).min(scenario.batch_size(b));
    (x.saturating_sub(behind) - remaining, remaining)
}

pub(crate) struct FifoChain<'a> {
    scenario: &'a Scenario,
    space: StateSpace,
}

impl<'a> FifoChain<'a> {
    pub(crate) fn new(scenario: &'a Scenario) -> Result<Self> {
        let n = scenario.n_clients();
        super::checked_block_size(scenario, std::iter::once(n + 1))?;
        let labels = (0..=n).map(|s| vec![s]).collect();
        Ok(Self { scenario, space: StateSpace::new(Policy::Fifo, scenario.batch_count(), labels) })
    }
}

impl BatchChain for FifoChain<'_> {
    fn space(&self) -> &StateSpace {
        &self.space
    }

    fn transition_block(&self, b: usize) -> DMatrix<f64> {
        let n = self.scenario.n_clients();
        let mean = self.scenario.service_rate() * self.scenario.offset(b + 1);
        let mut block = DMatrix::zeros(n + 1, n + 1);
        for from in 0..=n {
            // Stale frames of batch b sit at the head and are dropped.
            let x = (from + self.scenario.batch_size(b)).min(n);
            for (c, p) in completion_pmf(x, mean).into_iter().enumerate() {
                block[(from, x - c)] += p;
            }
        }
        block
    }

    fn delivered_fraction(&self, tagged: usize, local: usize) -> f64 {
        let n = self.scenario.n_clients();
        let size = self.scenario.batch_size(tagged);
        ((n - local) as f64 / size as f64).min(1.0)
    }

    fn service_terms(&self, tagged: usize, k: usize, local: usize, row: &mut [f64]) {
        let size = self.scenario.batch_size(tagged) as f64;
        let current = (tagged + k) % self.scenario.batch_count();
        let (ahead, remaining) = tagged_position(self.scenario, tagged, current, local);
        row.iter_mut().for_each(|v| *v = 0.0);
        row[0] = 1.0 - remaining as f64 / size;
        for w in &mut row[ahead + 1..=ahead + remaining] {
            *w = 1.0 / size;
        }
    }
}
