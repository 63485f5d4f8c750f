//! Markov analysis of the batch system, embedded right before each batch
//! generates.
//!
//! States are grouped into blocks `S_0..S_{B-1}`, where `S_b` holds the
//! states seen right before batch `b` generates. The one-step chain moves
//! `S_b` to `S_{b+1}` cyclically, so every quantity is built from the `B`
//! dense blocks `P_b : S_b → S_{b+1}` and their cyclic products. The two
//! policies only differ in the state encoding and in where a tagged frame
//! sits among the active frames ([`gps`], [`fifo`]).
//!
//! For a frame of batch `b` generated in state `s`, the probability of being
//! served by `t` is a combination of Erlang CDFs per inter-epoch gap:
//! `Σ_j C_k(s, j) F_j(t - τ(b, b+k))` for `t` in gap `k`, where `F_0 = 1`.
//! Latency CDFs, conditional expectations and PAoI all reuse these
//! coefficients `C_k`.

pub mod fifo;
pub mod gps;
pub mod timing;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metrics::{uniform_grid, DistributionCurve};
use crate::numerics::{erlang_cdf_integrals, erlang_cdfs, poisson_pmfs, stationary_distribution, StochasticMatrix};
use crate::scenario::{Policy, Scenario};
use crate::sync_analysis::PAOI_TAIL;

pub use timing::{batch_gap, batch_index_after};

/// Largest block `S_b` handled with dense matrices.
pub const BLOCK_CAP: usize = 4096;
/// Largest total state space `B · |S_b|`.
pub const STATE_CAP: usize = 200_000;
/// Largest state space exported as one dense matrix.
pub const DENSE_EXPORT_CAP: usize = 8192;
/// Failure runs longer than this are refused rather than iterated.
const MAX_FAILURE_RUN: usize = 100_000;
/// `π` mass tolerated on states that can never deliver.
const DEAD_STATE_MASS: f64 = 1e-12;

/// States of either chain, grouped by the batch about to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    policy: Policy,
    batch_count: usize,
    labels: Vec<Vec<usize>>,
}

impl StateSpace {
    pub(crate) fn new(policy: Policy, batch_count: usize, labels: Vec<Vec<usize>>) -> Self {
        Self { policy, batch_count, labels }
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn batch_count(&self) -> usize {
        self.batch_count
    }

    /// States per block `S_b`.
    pub fn block_size(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.batch_count * self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Residual counts of each state within a block, in index order. GPS
    /// labels hold one count per batch, FIFO labels the total backlog.
    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    /// Global index `b · |S_b| + local` to `(b, label)`.
    pub fn state(&self, index: usize) -> (usize, &[usize]) {
        let m = self.block_size();
        (index / m, &self.labels[index % m])
    }

    pub fn index(&self, batch: usize, label: &[usize]) -> Option<usize> {
        if batch >= self.batch_count {
            return None;
        }
        self.labels.iter().position(|l| l == label).map(|local| batch * self.block_size() + local)
    }

    /// One line per state: index, next batch and residual counts.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for idx in 0..self.len() {
            let (b, label) = self.state(idx);
            let counts: Vec<String> = label.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{idx}\t{b}\t{}\n", counts.join(",")));
        }
        out
    }
}

/// What the generic analysis needs from a policy.
pub(crate) trait BatchChain {
    fn space(&self) -> &StateSpace;

    /// One-step block `S_b → S_{b+1}`.
    fn transition_block(&self, b: usize) -> DMatrix<f64>;

    /// Fraction of the `tagged` batch's frames delivered, when the chain is
    /// back in `S_tagged` at state `local` one period after they were
    /// generated.
    fn delivered_fraction(&self, tagged: usize, local: usize) -> f64;

    /// Service profile of a frame of batch `tagged`, `k` epochs after its
    /// generation, when batch `tagged + k` generates in state `local`.
    /// `row[0]` is the probability of having been served already and
    /// `row[j]` the probability of being the `j`-th completion from here.
    fn service_terms(&self, tagged: usize, k: usize, local: usize, row: &mut [f64]);
}

/// PMF of completions among `x` active frames during a gap with `mean`
/// expected completions: Poisson below `x`, all remaining mass at `x`.
pub(crate) fn completion_pmf(x: usize, mean: f64) -> Vec<f64> {
    let mut pmf = poisson_pmfs(x, mean);
    pmf.push(if x == 0 { 1.0 } else { erlang_cdfs(x, 1.0, mean)[x] });
    pmf
}

pub(crate) fn checked_block_size(scenario: &Scenario, factors: impl Iterator<Item = usize>) -> Result<usize> {
    let block = factors.fold(Some(1usize), |acc, f| acc.and_then(|a| a.checked_mul(f)));
    let total = block.and_then(|m| m.checked_mul(scenario.batch_count()));
    match (block, total) {
        (Some(m), Some(total)) if m <= BLOCK_CAP && total <= STATE_CAP => Ok(m),
        (Some(m), _) if m > BLOCK_CAP => Err(Error::StateSpaceTooLarge { states: m, cap: BLOCK_CAP }),
        (_, total) => Err(Error::StateSpaceTooLarge { states: total.unwrap_or(usize::MAX), cap: STATE_CAP }),
    }
}

pub(crate) fn dense_transition_matrix(chain: &impl BatchChain) -> Result<StochasticMatrix> {
    let space = chain.space();
    let (b_count, m) = (space.batch_count(), space.block_size());
    if space.len() > DENSE_EXPORT_CAP {
        return Err(Error::StateSpaceTooLarge { states: space.len(), cap: DENSE_EXPORT_CAP });
    }
    let mut full = DMatrix::zeros(space.len(), space.len());
    for b in 0..b_count {
        let next = (b + 1) % b_count;
        full.view_mut((b * m, next * m), (m, m)).copy_from(&chain.transition_block(b));
    }
    StochasticMatrix::new(full)
}

/// One inter-epoch gap after the tagged batch generates.
#[derive(Debug, Clone)]
struct Segment {
    start: f64,
    len: f64,
    /// `C_k`, one row per state of `S_b`, one column per Erlang order.
    coef: DMatrix<f64>,
    /// `Σ_s π(s) C_k(s, ·) / Σ_s π(s) σ(s)`.
    batch_coef: Vec<f64>,
}

/// Failure run of length `m - 1` after a delivery.
#[derive(Debug, Clone)]
struct Run {
    /// Probability that the next `m - 1` frames all fail.
    at_least: f64,
    /// Per segment, `Σ_s v_m(s) C_k(s, ·)`.
    coef: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct BatchAnalysis {
    pi: DVector<f64>,
    b_step: DMatrix<f64>,
    sigma_state: DVector<f64>,
    sigma: f64,
    segments: Vec<Segment>,
    expected_latency: DVector<f64>,
    success_weights: DVector<f64>,
    given_success: DMatrix<f64>,
    failure: DMatrix<f64>,
    runs: Vec<Run>,
    /// Probability that the run outlives the table.
    beyond: f64,
}

/// Complete analysis of one scenario under one policy. Immutable once built.
#[derive(Debug, Clone)]
pub struct PolicyAnalysis {
    scenario: Scenario,
    policy: Policy,
    space: StateSpace,
    blocks: Vec<DMatrix<f64>>,
    batches: Vec<BatchAnalysis>,
}

/// Builds the embedded chain for `policy` and derives every metric.
pub fn analyze(scenario: &Scenario, policy: Policy) -> Result<PolicyAnalysis> {
    match policy {
        Policy::Gps => build(scenario, policy, &gps::GpsChain::new(scenario)?),
        Policy::Fifo => build(scenario, policy, &fifo::FifoChain::new(scenario)?),
    }
}

fn build(scenario: &Scenario, policy: Policy, chain: &impl BatchChain) -> Result<PolicyAnalysis> {
    let b_count = scenario.batch_count();
    let m = chain.space().block_size();
    let n = scenario.n_clients();

    let blocks = (0..b_count)
        .map(|b| StochasticMatrix::new(chain.transition_block(b)).map(StochasticMatrix::into_inner))
        .collect::<Result<Vec<_>>>()?;

    // Cyclic products and service coefficients for every tagged batch.
    let mut b_steps = Vec::with_capacity(b_count);
    let mut segment_sets = Vec::with_capacity(b_count);
    let mut row = vec![0.0; n + 1];
    for b in 0..b_count {
        let mut product = DMatrix::<f64>::identity(m, m);
        let mut segments = Vec::with_capacity(b_count);
        for k in 0..b_count {
            let mut terms = DMatrix::zeros(m, n + 1);
            for local in 0..m {
                chain.service_terms(b, k, local, &mut row);
                terms.row_mut(local).copy_from_slice(&row);
            }
            segments.push(Segment {
                start: batch_gap(scenario, b, b + k),
                len: scenario.offset(b + k + 1),
                coef: if k == 0 { terms } else { &product * terms },
                batch_coef: Vec::new(),
            });
            product = &product * &blocks[(b + k) % b_count];
        }
        b_steps.push(StochasticMatrix::new(product)?.into_inner());
        segment_sets.push(segments);
    }

    // Stationary law of each block: solve on the B-step chain of S_0, then
    // push it around the cycle.
    let mut pi = stationary_distribution(&StochasticMatrix::new(b_steps[0].clone())?, None)? / b_count as f64;
    let mut pis = Vec::with_capacity(b_count);
    for block in &blocks {
        let next = block.tr_mul(&pi);
        pis.push(pi);
        pi = next;
    }
    let drift = (&pi - &pis[0]).amax();
    if drift > 1e-9 {
        return Err(Error::NoConvergence { residual: drift });
    }

    let mut batches = Vec::with_capacity(b_count);
    for (b, (segments, (b_step, pi))) in segment_sets.into_iter().zip(b_steps.into_iter().zip(pis)).enumerate() {
        let delivered = DVector::from_fn(m, |i, _| chain.delivered_fraction(b, i));
        batches.push(batch_analysis(scenario, b, segments, b_step, pi, delivered)?);
    }

    Ok(PolicyAnalysis { scenario: scenario.clone(), policy, space: chain.space().clone(), blocks, batches })
}

fn batch_analysis(
    scenario: &Scenario,
    b: usize,
    mut segments: Vec<Segment>,
    b_step: DMatrix<f64>,
    pi: DVector<f64>,
    delivered: DVector<f64>,
) -> Result<BatchAnalysis> {
    let m = pi.len();
    let n = scenario.n_clients();
    let sigma_state = &b_step * &delivered;
    let weighted = pi.dot(&sigma_state);
    if !(weighted > 0.0) {
        return Err(Error::Inconsistent(format!("batch {b} never delivers")));
    }
    let sigma = weighted / pi.sum();

    let mut given_success = DMatrix::zeros(m, m);
    let mut failure = DMatrix::zeros(m, m);
    for s in 0..m {
        for t in 0..m {
            failure[(s, t)] = b_step[(s, t)] * (1.0 - delivered[t]);
        }
        if sigma_state[s] > 0.0 {
            for t in 0..m {
                given_success[(s, t)] = b_step[(s, t)] * delivered[t] / sigma_state[s];
            }
        } else if pi[s] > DEAD_STATE_MASS {
            return Err(Error::Inconsistent(format!("state {s} of batch {b} never delivers but has mass {}", pi[s])));
        }
    }

    let period = scenario.period();
    let mut served_area = DVector::zeros(m);
    for seg in &mut segments {
        let integrals = DVector::from_vec(erlang_cdf_integrals(n, scenario.service_rate(), seg.len));
        served_area += &seg.coef * integrals;
        seg.batch_coef = (seg.coef.tr_mul(&pi) / weighted).iter().copied().collect();
    }
    let expected_latency = DVector::from_fn(m, |s, _| {
        if sigma_state[s] > 0.0 {
            (period - served_area[s] / sigma_state[s]).clamp(0.0, period)
        } else {
            period
        }
    });

    let success_weights = pi.component_mul(&sigma_state) / weighted;
    let mut v = given_success.tr_mul(&success_weights);
    let mut runs = Vec::new();
    let beyond = loop {
        let at_least = v.sum();
        runs.push(Run { at_least, coef: segments.iter().map(|seg| seg.coef.tr_mul(&v).iter().copied().collect()).collect() });
        let next = failure.tr_mul(&v);
        if at_least < PAOI_TAIL {
            break next.sum();
        }
        if runs.len() >= MAX_FAILURE_RUN {
            return Err(Error::NoConvergence { residual: at_least });
        }
        v = next;
    };

    Ok(BatchAnalysis {
        pi,
        b_step,
        sigma_state,
        sigma,
        segments,
        expected_latency,
        success_weights,
        given_success,
        failure,
        runs,
        beyond,
    })
}

fn dot(coef: &[f64], cdf: &[f64]) -> f64 {
    coef.iter().zip(cdf).map(|(c, f)| c * f).sum()
}

impl PolicyAnalysis {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.space
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    fn batch(&self, b: usize) -> Result<&BatchAnalysis> {
        self.batches
            .get(b)
            .ok_or_else(|| Error::Domain(format!("batch {b} out of range (B = {})", self.batches.len())))
    }

    /// One-step block `P_b : S_b → S_{b+1}`.
    pub fn transition_block(&self, b: usize) -> &DMatrix<f64> {
        &self.blocks[b % self.blocks.len()]
    }

    /// Full one-step matrix, states ordered as in [`StateSpace`].
    pub fn transition_matrix(&self) -> Result<StochasticMatrix> {
        let (b_count, m) = (self.batch_count(), self.space.block_size());
        if self.space.len() > DENSE_EXPORT_CAP {
            return Err(Error::StateSpaceTooLarge { states: self.space.len(), cap: DENSE_EXPORT_CAP });
        }
        let mut full = DMatrix::zeros(self.space.len(), self.space.len());
        for (b, block) in self.blocks.iter().enumerate() {
            full.view_mut((b * m, (b + 1) % b_count * m), (m, m)).copy_from(block);
        }
        StochasticMatrix::new(full)
    }

    /// `π` restricted to `S_b`; each block carries mass `1/B`.
    pub fn stationary(&self, b: usize) -> Result<&DVector<f64>> {
        Ok(&self.batch(b)?.pi)
    }

    /// `π` over the full state space.
    pub fn stationary_full(&self) -> DVector<f64> {
        let parts: Vec<f64> = self.batches.iter().flat_map(|a| a.pi.iter().copied()).collect();
        DVector::from_vec(parts)
    }

    /// `P^B` restricted to `S_b`.
    pub fn b_step_matrix(&self, b: usize) -> Result<&DMatrix<f64>> {
        Ok(&self.batch(b)?.b_step)
    }

    /// `σ(s)` for every state of `S_b`.
    pub fn state_success(&self, b: usize) -> Result<&DVector<f64>> {
        Ok(&self.batch(b)?.sigma_state)
    }

    /// `σ_b`.
    pub fn batch_success(&self, b: usize) -> Result<f64> {
        Ok(self.batch(b)?.sigma)
    }

    /// Fraction of all frames delivered, `Σ_b N_b σ_b / N`.
    pub fn success_rate(&self) -> f64 {
        self.delivery_weights().iter().sum::<f64>() / self.scenario.n_clients() as f64
    }

    /// `N_b σ_b` per batch: relative delivery rates.
    fn delivery_weights(&self) -> Vec<f64> {
        self.batches
            .iter()
            .enumerate()
            .map(|(b, a)| self.scenario.batch_size(b) as f64 * a.sigma)
            .collect()
    }

    /// `P(s, s′ | D)`: B-step transitions given the tagged frame succeeds.
    /// Rows of states that never deliver are zero.
    pub fn given_success(&self, b: usize) -> Result<&DMatrix<f64>> {
        Ok(&self.batch(b)?.given_success)
    }

    /// `P_D̄(s, s′)`: B-step transitions jointly with a failure.
    pub fn failure_matrix(&self, b: usize) -> Result<&DMatrix<f64>> {
        Ok(&self.batch(b)?.failure)
    }

    /// `P(s, s′ | D̄)`. Rows of states that always deliver are zero.
    pub fn given_failure(&self, b: usize) -> Result<DMatrix<f64>> {
        let a = self.batch(b)?;
        let mut out = a.failure.clone();
        for (s, mut row) in out.row_iter_mut().enumerate() {
            let fail = 1.0 - a.sigma_state[s];
            if fail > 0.0 {
                row /= fail;
            } else {
                row.fill(0.0);
            }
        }
        Ok(out)
    }

    /// Stationary distribution of the generating state of a delivered
    /// frame of batch `b`, `π(s)σ(s) / Σ πσ`.
    pub fn success_weights(&self, b: usize) -> Result<&DVector<f64>> {
        Ok(&self.batch(b)?.success_weights)
    }

    /// `E[T | S = s]` for the states of `S_b`. States that never deliver
    /// report `τ`.
    pub fn expected_latency_given_state(&self, b: usize) -> Result<&DVector<f64>> {
        Ok(&self.batch(b)?.expected_latency)
    }

    /// Mean latency of delivered frames of batch `b`.
    pub fn batch_expected_latency(&self, b: usize) -> Result<f64> {
        let a = self.batch(b)?;
        Ok(a.success_weights.dot(&a.expected_latency))
    }

    /// Accepts `t` in `[0, τ]` up to rounding at the upper end.
    fn latency_time(&self, t: f64) -> Result<f64> {
        let tau = self.scenario.period();
        if !(0.0..=tau * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!("latency is only defined on [0, {tau}], got {t}")));
        }
        Ok(t.min(tau))
    }

    fn erlang_row(&self, t: f64) -> Vec<f64> {
        erlang_cdfs(self.scenario.n_clients(), self.scenario.service_rate(), t)
    }

    /// `P_{T|S}(t | s)` for state `local` of `S_b`.
    pub fn state_latency_cdf(&self, b: usize, local: usize, t: f64) -> Result<f64> {
        let t = self.latency_time(t)?;
        let a = self.batch(b)?;
        let sigma = *a
            .sigma_state
            .get(local)
            .ok_or_else(|| Error::Domain(format!("state {local} out of range")))?;
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("state {local} of batch {b} never delivers")));
        }
        let (k, rest) = timing::segment_of(&self.scenario, b, t);
        let coef: Vec<f64> = a.segments[k].coef.row(local).iter().copied().collect();
        Ok((dot(&coef, &self.erlang_row(rest)) / sigma).clamp(0.0, 1.0))
    }

    /// `P_T^{(b)}(t)`: latency CDF of delivered frames of batch `b`.
    pub fn latency_cdf(&self, b: usize, t: f64) -> Result<f64> {
        let t = self.latency_time(t)?;
        let a = self.batch(b)?;
        let (k, rest) = timing::segment_of(&self.scenario, b, t);
        Ok(dot(&a.segments[k].batch_coef, &self.erlang_row(rest)).clamp(0.0, 1.0))
    }

    /// Latency CDF over all delivered frames.
    pub fn mixed_latency_cdf(&self, t: f64) -> Result<f64> {
        self.mixture(|b| self.latency_cdf(b, t))
    }

    fn mixture(&self, f: impl Fn(usize) -> Result<f64>) -> Result<f64> {
        let weights = self.delivery_weights();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        for (b, w) in weights.iter().enumerate() {
            acc += w * f(b)?;
        }
        Ok((acc / total).clamp(0.0, 1.0))
    }

    /// `P_Ψ^{(b)}(ψ)`: PAoI CDF of clients in batch `b`.
    pub fn paoi_cdf(&self, b: usize, psi: f64) -> Result<f64> {
        if !(psi >= 0.0) {
            return Err(Error::Domain(format!("PAoI must be nonnegative, got {psi}")));
        }
        let a = self.batch(b)?;
        let period = self.scenario.period();
        let whole = (psi / period).floor();
        if whole < 1.0 {
            return Ok(0.0);
        }
        let m = whole as usize;
        let Some(run) = a.runs.get(m - 1) else {
            return Ok(1.0 - a.beyond);
        };
        let rest = (psi - whole * period).clamp(0.0, period);
        let (k, offset) = timing::segment_of(&self.scenario, b, rest);
        Ok((1.0 - run.at_least + dot(&run.coef[k], &self.erlang_row(offset))).clamp(0.0, 1.0))
    }

    /// PAoI CDF over all deliveries.
    pub fn mixed_paoi_cdf(&self, psi: f64) -> Result<f64> {
        self.mixture(|b| self.paoi_cdf(b, psi))
    }

    /// Periods after which the PAoI tail of batch `b` is below `1e-9`.
    pub fn paoi_horizon(&self, b: usize) -> Result<usize> {
        Ok(self.batch(b)?.runs.len() + 1)
    }

    /// Worst-case truncation bound `⌈ln 1e-9 / ln max_s(1 - σ(s))⌉` over
    /// the states of `S_b`.
    pub fn tail_bound(&self, b: usize) -> Result<usize> {
        let worst = self.batch(b)?.sigma_state.iter().map(|s| 1.0 - s).fold(0.0, f64::max);
        Ok(crate::sync_analysis::tail_periods(worst))
    }

    /// Latency CDF on `points` evenly spaced instants of `[0, τ]`, for one
    /// batch or (`None`) all deliveries.
    pub fn latency_curve(&self, batch: Option<usize>, points: usize) -> Result<DistributionCurve> {
        let grid = uniform_grid(0.0, self.scenario.period(), points);
        match batch {
            Some(b) => DistributionCurve::from_fn(&grid, |t| self.latency_cdf(b, t)),
            None => DistributionCurve::from_fn(&grid, |t| self.mixed_latency_cdf(t)),
        }
    }

    /// PAoI CDF with `points_per_period` points per period, up to the
    /// truncation horizon.
    pub fn paoi_curve(&self, batch: Option<usize>, points_per_period: usize) -> Result<DistributionCurve> {
        let periods = match batch {
            Some(b) => self.paoi_horizon(b)?,
            None => (0..self.batch_count()).map(|b| self.paoi_horizon(b)).collect::<Result<Vec<_>>>()?.into_iter().max().unwrap_or(1),
        };
        let grid = uniform_grid(0.0, periods as f64 * self.scenario.period(), periods * points_per_period.max(1) + 1);
        match batch {
            Some(b) => DistributionCurve::from_fn(&grid, |psi| self.paoi_cdf(b, psi)),
            None => DistributionCurve::from_fn(&grid, |psi| self.mixed_paoi_cdf(psi)),
        }
    }

    /// Segment starts and lengths after batch `b` generates.
    pub fn segments(&self, b: usize) -> Result<Vec<(f64, f64)>> {
        Ok(self.batch(b)?.segments.iter().map(|s| (s.start, s.len)).collect())
    }
}
