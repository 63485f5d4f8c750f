//! Discrete-event Monte Carlo simulation of the physical system.
//!
//! Only [`Scenario`] is shared with the analytical code. Between batch
//! epochs, completions form a Poisson stream of rate `μ` whenever a frame is
//! active: GPS removes a uniformly random active frame, FIFO the head of the
//! queue. A completion that would fall after the next epoch is dropped,
//! which is exact by memorylessness. At an epoch the generating batch loses
//! its unfinished frames and its clients start new ones (under FIFO, at the
//! tail of the queue in a fresh random order).
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `r`, so replications are independent and reproducible.

mod empirical;
mod report;

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::scenario::{Policy, Scenario};

pub use empirical::{dkw_band, empirical_cdf, ks_two_sample, SampleSet, HISTOGRAM_BINS};
pub use report::{BlockTotals, ClientStats, SimulationReport};

/// Warmup used by [`SimulationConfig::new`] when the run is long enough.
pub const DEFAULT_WARMUP: u64 = 1_000;
/// Raw samples kept per metric before switching to histograms.
pub const SAMPLE_BUDGET: usize = 10_000_000;
/// PAoI histograms cover `[0, PAOI_RANGE · τ]`.
pub const PAOI_RANGE: f64 = 50.0;
/// Batch-means blocks per replication.
pub const BLOCKS: u64 = 50;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub scenario: Scenario,
    pub policy: Policy,
    pub periods: u64,
    pub warmup_periods: u64,
    pub seed: u64,
    pub replications: u32,
    /// Raw samples kept per client and metric.
    pub sample_cap: usize,
}

impl SimulationConfig {
    /// One replication, warmup of [`DEFAULT_WARMUP`] periods (a tenth of the
    /// run if shorter) and a raw-sample budget of [`SAMPLE_BUDGET`] shared
    /// by the clients.
    pub fn new(scenario: Scenario, policy: Policy, periods: u64, seed: u64) -> Self {
        let sample_cap = SAMPLE_BUDGET / scenario.n_clients();
        Self {
            scenario,
            policy,
            periods,
            warmup_periods: DEFAULT_WARMUP.min(periods / 10),
            seed,
            replications: 1,
            sample_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Domain("at least one replication is needed".into()));
        }
        // Frames of the last period are never decided, hence the +2.
        if self.periods < self.warmup_periods + 2 {
            return Err(Error::Domain(format!(
                "{} periods leave nothing to measure after a warmup of {}",
                self.periods, self.warmup_periods
            )));
        }
        Ok(())
    }
}

/// Runs every replication and merges the results in replication order.
pub fn run(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let mut report = replicate(config, 0);
    for r in 1..config.replications {
        report = report.merge(&replicate(config, u64::from(r)));
    }
    Ok(report)
}

/// Runs replication `replication` alone. Merging replications `0..n` in
/// order reproduces [`run`] exactly.
pub fn run_replication(config: &SimulationConfig, replication: u32) -> Result<SimulationReport> {
    config.validate()?;
    if replication >= config.replications {
        return Err(Error::Domain(format!(
            "replication {replication} out of {}",
            config.replications
        )));
    }
    Ok(replicate(config, u64::from(replication)))
}

struct Frame {
    generated: f64,
    period: u64,
}

struct Delivery {
    time: f64,
    generated: f64,
    period: u64,
}

struct Client {
    frame: Option<Frame>,
    last: Option<Delivery>,
    stats: ClientStats,
}

struct Simulation<'a> {
    config: &'a SimulationConfig,
    rng: ChaCha8Rng,
    service: Exp<f64>,
    clients: Vec<Client>,
    batch_of: Vec<usize>,
    active: Vec<usize>,
    queue: VecDeque<usize>,
    now: f64,
    measured: u64,
    blocks: u64,
}

impl Simulation<'_> {
    fn counted(&self, period: u64) -> bool {
        period >= self.config.warmup_periods && period < self.config.periods - 1
    }

    fn block(&self, period: u64) -> usize {
        ((period - self.config.warmup_periods) * self.blocks / self.measured) as usize
    }

    fn is_idle(&self) -> bool {
        match self.config.policy {
            Policy::Gps => self.active.is_empty(),
            Policy::Fifo => self.queue.is_empty(),
        }
    }

    /// Serves frames until `until`.
    fn advance(&mut self, until: f64) {
        while !self.is_idle() {
            let gap = self.service.sample(&mut self.rng);
            if self.now + gap >= until {
                break;
            }
            self.now += gap;
            let client = match self.config.policy {
                Policy::Gps => {
                    let pick = self.rng.random_range(0..self.active.len());
                    self.active.swap_remove(pick)
                }
                Policy::Fifo => self.queue.pop_front().expect("queue is not idle"),
            };
            self.deliver(client);
        }
        self.now = until;
    }

    fn deliver(&mut self, client: usize) {
        let now = self.now;
        let frame = self.clients[client].frame.take().expect("served frames are active");
        let counted = self.counted(frame.period);
        let block = if counted { self.block(frame.period) } else { 0 };
        let state = &mut self.clients[client];
        if counted {
            let stats = &mut state.stats;
            stats.successes += 1;
            stats.blocks[block].successes += 1;
            stats.latency.push(now - frame.generated);
            if let Some(prev) = &state.last {
                let peak = now - prev.generated;
                let reset = prev.time - prev.generated;
                let span = now - prev.time;
                let area = span * (reset + peak) / 2.0;
                stats.paoi.push(peak);
                stats.aoi_area += area;
                stats.aoi_renewal_area += (peak * peak - reset * reset) / 2.0;
                stats.aoi_span += span;
                stats.blocks[block].aoi_area += area;
                stats.blocks[block].aoi_span += span;
                let gap = (frame.period - prev.period) as usize;
                if stats.gap_counts.len() <= gap {
                    stats.gap_counts.resize(gap + 1, 0);
                }
                stats.gap_counts[gap] += 1;
            }
        }
        state.last = Some(Delivery { time: now, generated: frame.generated, period: frame.period });
    }

    fn generate(&mut self, batch: usize, members: &[usize], period: u64) {
        let batch_of = &self.batch_of;
        match self.config.policy {
            Policy::Gps => self.active.retain(|&c| batch_of[c] != batch),
            Policy::Fifo => self.queue.retain(|&c| batch_of[c] != batch),
        }
        for &c in members {
            if let Some(stale) = self.clients[c].frame.take() {
                if self.counted(stale.period) {
                    let block = self.block(stale.period);
                    let stats = &mut self.clients[c].stats;
                    stats.failures += 1;
                    stats.blocks[block].failures += 1;
                }
            }
            self.clients[c].frame = Some(Frame { generated: self.now, period });
        }
        match self.config.policy {
            Policy::Gps => self.active.extend_from_slice(members),
            Policy::Fifo => {
                let mut order = members.to_vec();
                order.shuffle(&mut self.rng);
                self.queue.extend(order);
            }
        }
    }
}

fn replicate(config: &SimulationConfig, replication: u64) -> SimulationReport {
    let scenario = &config.scenario;
    let tau = scenario.period();
    let batch_of = scenario.client_batches();
    let mut members = vec![Vec::new(); scenario.batch_count()];
    for (c, &b) in batch_of.iter().enumerate() {
        members[b].push(c);
    }
    let measured = config.periods - 1 - config.warmup_periods;
    let blocks = BLOCKS.min(measured);
    let clients = batch_of
        .iter()
        .enumerate()
        .map(|(client, &batch)| Client {
            frame: None,
            last: None,
            stats: ClientStats {
                client,
                batch,
                successes: 0,
                failures: 0,
                latency: SampleSet::new(config.sample_cap, 0.0, tau),
                paoi: SampleSet::new(config.sample_cap, 0.0, PAOI_RANGE * tau),
                gap_counts: Vec::new(),
                aoi_area: 0.0,
                aoi_renewal_area: 0.0,
                aoi_span: 0.0,
                blocks: vec![BlockTotals::default(); blocks as usize],
            },
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replication);
    let mut sim = Simulation {
        config,
        rng,
        service: Exp::new(scenario.service_rate()).expect("validated rate"),
        clients,
        batch_of,
        active: Vec::with_capacity(scenario.n_clients()),
        queue: VecDeque::with_capacity(scenario.n_clients()),
        now: 0.0,
        measured,
        blocks,
    };

    let starts = scenario.batch_starts();
    for period in 0..config.periods {
        for (b, start) in starts.iter().enumerate() {
            sim.advance(period as f64 * tau + start);
            sim.generate(b, &members[b], period);
        }
    }
    sim.advance(config.periods as f64 * tau);

    let clients = sim
        .clients
        .into_iter()
        .map(|mut c| {
            c.stats.latency.finish();
            c.stats.paoi.finish();
            c.stats
        })
        .collect();
    SimulationReport {
        policy: config.policy,
        periods: config.periods,
        warmup_periods: config.warmup_periods,
        seed: config.seed,
        replications: 1,
        clients,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, mu: f64, batches: usize, policy: Policy, periods: u64) -> SimulationConfig {
        SimulationConfig::new(Scenario::uniform(n, mu, 1.0, batches).unwrap(), policy, periods, 42)
    }

    #[test]
    fn rejects_empty_measurement_window() {
        let mut c = config(2, 1.0, 1, Policy::Gps, 10);
        c.warmup_periods = 9;
        assert!(run(&c).is_err());
        c.warmup_periods = 0;
        c.replications = 0;
        assert!(run(&c).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        for policy in Policy::ALL {
            let c = config(4, 3.0, 2, policy, 2_000);
            assert_eq!(run(&c).unwrap(), run(&c).unwrap());
        }
    }

    #[test]
    fn replications_differ_and_merge() {
        let mut c = config(3, 2.0, 3, Policy::Fifo, 1_000);
        c.replications = 2;
        let merged = run(&c).unwrap();
        assert_eq!(merged.replications, 2);
        let single = run(&SimulationConfig { replications: 1, ..c.clone() }).unwrap();
        assert_eq!(merged.client(0).frames(), 2 * single.client(0).frames());
        assert_ne!(merged.client(0).successes, 2 * single.client(0).successes);
    }

    #[test]
    fn single_replications_rebuild_the_run() {
        let mut c = config(3, 2.0, 3, Policy::Gps, 500);
        c.replications = 3;
        let merged = (1..3).fold(run_replication(&c, 0).unwrap(), |acc, r| acc.merge(&run_replication(&c, r).unwrap()));
        assert_eq!(merged, run(&c).unwrap());
        assert!(run_replication(&c, 3).is_err());
    }

    #[test]
    fn merge_order_does_not_change_statistics() {
        let c = config(4, 4.0, 2, Policy::Gps, 1_000);
        let a = run(&c).unwrap();
        let b = run(&SimulationConfig { seed: 7, ..c }).unwrap();
        let (ab, ba) = (a.merge(&b), b.merge(&a));
        assert_eq!(ab.success_rate(None), ba.success_rate(None));
        assert!((ab.success_rate_se(None) - ba.success_rate_se(None)).abs() < 1e-15);
        assert_eq!(ab.client(1).latency, ba.client(1).latency);
        assert!((ab.expected_aoi(None) - ba.expected_aoi(None)).abs() < 1e-12);
    }

    #[test]
    fn basic_invariants() {
        for policy in Policy::ALL {
            let r = run(&config(6, 5.0, 3, policy, 5_000)).unwrap();
            for c in &r.clients {
                assert!((0.0..=1.0).contains(&c.success_rate()));
                assert!(c.expected_aoi() >= 0.5);
                let paoi = c.paoi.values().unwrap();
                assert!(paoi[0] >= 1.0 - 1e-9);
                let latency = c.latency.values().unwrap();
                assert!(latency[0] >= 0.0 && *latency.last().unwrap() <= 1.0);
                let rel = (c.expected_aoi() - c.expected_aoi_renewal()).abs() / c.expected_aoi();
                assert!(rel < 1e-9, "{rel}");
            }
        }
    }
}
