//! Per-client statistics and their aggregation.

use serde::Serialize;

use super::empirical::SampleSet;
use crate::scenario::Policy;

/// Totals of one block of consecutive periods, used for batch-means
/// standard errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BlockTotals {
    pub successes: u64,
    pub failures: u64,
    pub aoi_area: f64,
    pub aoi_span: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientStats {
    pub client: usize,
    pub batch: usize,
    pub successes: u64,
    pub failures: u64,
    pub latency: SampleSet,
    pub paoi: SampleSet,
    /// `gap_counts[m]` counts consecutive deliveries whose frames were
    /// generated `m` periods apart.
    pub gap_counts: Vec<u64>,
    /// Area under the AoI sawtooth, summed one trapezoid per delivery.
    pub aoi_area: f64,
    /// Same area from `((Y + T)² - T_prev²) / 2` per delivery.
    pub aoi_renewal_area: f64,
    /// Time covered by the AoI integrals.
    pub aoi_span: f64,
    pub blocks: Vec<BlockTotals>,
}

impl ClientStats {
    pub fn frames(&self) -> u64 {
        self.successes + self.failures
    }

    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.frames() as f64
    }

    pub fn success_rate_se(&self) -> f64 {
        let (num, den): (Vec<f64>, Vec<f64>) = self
            .blocks
            .iter()
            .map(|b| (b.successes as f64, (b.successes + b.failures) as f64))
            .unzip();
        ratio_se(&num, &den)
    }

    /// Time-average AoI.
    pub fn expected_aoi(&self) -> f64 {
        self.aoi_area / self.aoi_span
    }

    /// Time-average AoI from the recorded `(Y, T)` pairs.
    pub fn expected_aoi_renewal(&self) -> f64 {
        self.aoi_renewal_area / self.aoi_span
    }

    pub fn aoi_se(&self) -> f64 {
        let (num, den): (Vec<f64>, Vec<f64>) = self.blocks.iter().map(|b| (b.aoi_area, b.aoi_span)).unzip();
        ratio_se(&num, &den)
    }

    /// Empirical `P(Y = mτ)`.
    pub fn gap_pmf(&self, m: usize) -> f64 {
        let total: u64 = self.gap_counts.iter().sum();
        self.gap_counts.get(m).copied().unwrap_or(0) as f64 / total as f64
    }

    fn merge(&self, other: &ClientStats) -> ClientStats {
        let len = self.gap_counts.len().max(other.gap_counts.len());
        let gap_counts = (0..len)
            .map(|m| self.gap_counts.get(m).copied().unwrap_or(0) + other.gap_counts.get(m).copied().unwrap_or(0))
            .collect();
        let mut blocks = self.blocks.clone();
        blocks.extend_from_slice(&other.blocks);
        ClientStats {
            client: self.client,
            batch: self.batch,
            successes: self.successes + other.successes,
            failures: self.failures + other.failures,
            latency: self.latency.merge(&other.latency),
            paoi: self.paoi.merge(&other.paoi),
            gap_counts,
            aoi_area: self.aoi_area + other.aoi_area,
            aoi_renewal_area: self.aoi_renewal_area + other.aoi_renewal_area,
            aoi_span: self.aoi_span + other.aoi_span,
            blocks,
        }
    }
}

/// Standard error of `Σnum / Σden` from per-block values (ratio
/// estimator).
fn ratio_se(num: &[f64], den: &[f64]) -> f64 {
    let k = num.len();
    if k < 2 {
        return f64::NAN;
    }
    let total_den: f64 = den.iter().sum();
    let ratio = num.iter().sum::<f64>() / total_den;
    let var = num.iter().zip(den).map(|(n, d)| (n - ratio * d).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt() / (total_den / k as f64)
}

/// Standard error of the mean of per-block values.
fn mean_se(values: &[f64]) -> f64 {
    let k = values.len();
    if k < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub policy: Policy,
    pub periods: u64,
    pub warmup_periods: u64,
    pub seed: u64,
    pub replications: u32,
    pub clients: Vec<ClientStats>,
}

impl SimulationReport {
    pub fn client(&self, i: usize) -> &ClientStats {
        &self.clients[i]
    }

    fn batch_clients(&self, batch: Option<usize>) -> impl Iterator<Item = &ClientStats> {
        self.clients.iter().filter(move |c| batch.is_none_or(|b| c.batch == b))
    }

    /// Pooled success rate of one batch, or of all clients.
    pub fn success_rate(&self, batch: Option<usize>) -> f64 {
        let (s, n) = self
            .batch_clients(batch)
            .fold((0u64, 0u64), |(s, n), c| (s + c.successes, n + c.frames()));
        s as f64 / n as f64
    }

    pub fn success_rate_se(&self, batch: Option<usize>) -> f64 {
        let blocks = self.clients.first().map_or(0, |c| c.blocks.len());
        let mut num = vec![0.0; blocks];
        let mut den = vec![0.0; blocks];
        for c in self.batch_clients(batch) {
            for (k, b) in c.blocks.iter().enumerate() {
                num[k] += b.successes as f64;
                den[k] += (b.successes + b.failures) as f64;
            }
        }
        ratio_se(&num, &den)
    }

    /// Mean over clients of the time-average AoI.
    pub fn expected_aoi(&self, batch: Option<usize>) -> f64 {
        let values: Vec<f64> = self.batch_clients(batch).map(ClientStats::expected_aoi).collect();
        values.iter().sum::<f64>() / values.len() as f64
    }

    pub fn expected_aoi_se(&self, batch: Option<usize>) -> f64 {
        let clients: Vec<&ClientStats> = self.batch_clients(batch).collect();
        let blocks = clients.first().map_or(0, |c| c.blocks.len());
        let per_block: Vec<f64> = (0..blocks)
            .map(|k| {
                clients.iter().map(|c| c.blocks[k].aoi_area / c.blocks[k].aoi_span).sum::<f64>() / clients.len() as f64
            })
            .collect();
        mean_se(&per_block)
    }

    /// Latency samples of every client in `batch` (or all clients) pooled.
    pub fn pooled_latency(&self, batch: Option<usize>) -> Option<SampleSet> {
        self.batch_clients(batch).map(|c| c.latency.clone()).reduce(|a, b| a.merge(&b))
    }

    /// PAoI samples of every client in `batch` (or all clients) pooled.
    pub fn pooled_paoi(&self, batch: Option<usize>) -> Option<SampleSet> {
        self.batch_clients(batch).map(|c| c.paoi.clone()).reduce(|a, b| a.merge(&b))
    }

    /// Combines two independent runs of the same configuration.
    pub fn merge(&self, other: &SimulationReport) -> SimulationReport {
        SimulationReport {
            policy: self.policy,
            periods: self.periods,
            warmup_periods: self.warmup_periods,
            seed: self.seed.min(other.seed),
            replications: self.replications + other.replications,
            clients: self.clients.iter().zip(&other.clients).map(|(a, b)| a.merge(b)).collect(),
        }
    }
}
