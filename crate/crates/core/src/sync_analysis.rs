//! Closed forms for the synchronized system (`B = 1`).
//!
//! With every client generating at the same instant, departures during a
//! period form a Poisson process of rate `μ` truncated at `N`, and GPS and
//! FIFO (with random order inside the batch) behave identically. Each
//! period starts afresh, so successes are independent across periods and
//! every metric is an `O(N)` sum of Poisson terms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{uniform_grid, DistributionCurve};
use crate::numerics::{erlang_cdfs, poisson_pmfs};
use crate::scenario::Scenario;

/// Right-tail mass ignored when truncating PAoI curves.
pub const PAOI_TAIL: f64 = 1e-9;

/// Scalar metrics of a synchronized system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyncMetrics {
    pub success_probability: f64,
    pub expected_latency: f64,
    pub expected_aoi: f64,
}

/// `N` synchronized clients, service rate `μ`, period `τ`.
#[derive(Debug, Clone, Copy)]
pub struct SyncSystem {
    clients: usize,
    rate: f64,
    period: f64,
    success: f64,
}

impl SyncSystem {
    pub fn new(clients: usize, rate: f64, period: f64) -> Result<Self> {
        if clients == 0 || !(rate > 0.0) || !(period > 0.0) || !rate.is_finite() || !period.is_finite() {
            return Err(Error::Domain(format!(
                "synchronized system needs N >= 1, μ > 0, τ > 0 (got {clients}, {rate}, {period})"
            )));
        }
        let mut system = Self { clients, rate, period, success: 0.0 };
        system.success = system.compute_success();
        Ok(system)
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        if !scenario.is_synchronized() {
            return Err(Error::Domain(format!(
                "closed forms need a single batch, scenario has {}",
                scenario.batch_count()
            )));
        }
        Self::new(scenario.n_clients(), scenario.service_rate(), scenario.period())
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// PMF of the number of frames still in service right before the next
    /// generation instant, over `0..=N`.
    pub fn residual_pmf(&self) -> Vec<f64> {
        let n = self.clients;
        let x = self.rate * self.period;
        let pois = poisson_pmfs(n, x);
        let mut pmf = Vec::with_capacity(n + 1);
        pmf.push(erlang_cdfs(n, self.rate, self.period)[n]);
        pmf.extend((1..=n).map(|k| pois[n - k]));
        pmf
    }

    fn compute_success(&self) -> f64 {
        let n = self.clients as f64;
        self.residual_pmf()
            .iter()
            .enumerate()
            .map(|(k, p)| (n - k as f64) / n * p)
            .sum()
    }

    /// Probability that a frame is delivered before its successor is generated.
    pub fn success_probability(&self) -> f64 {
        self.success
    }

    /// Probability that a given frame has been served within `t` of its
    /// generation, not conditioned on success.
    fn served_by(&self, t: f64) -> f64 {
        let n = self.clients;
        let pois = poisson_pmfs(n, self.rate * t);
        let tail = erlang_cdfs(n, self.rate, t)[n];
        tail + (1..n).map(|k| pois[k] * k as f64 / n as f64).sum::<f64>()
    }

    /// Latency CDF of delivered frames, for `0 <= t <= τ`.
    pub fn latency_cdf(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.period * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!("latency is only defined on [0, {}], got {t}", self.period)));
        }
        Ok((self.served_by(t.min(self.period)) / self.success).min(1.0))
    }

    /// Latency CDF on `points` evenly spaced instants of `[0, τ]`.
    pub fn latency_curve(&self, points: usize) -> Result<DistributionCurve> {
        DistributionCurve::from_fn(&uniform_grid(0.0, self.period, points), |t| self.latency_cdf(t))
    }

    /// PAoI CDF: zero below `τ`, then
    /// `1 - (1-σ)^{⌊ψ/τ⌋-1} (1 - σ P_T(ψ mod τ))`.
    pub fn paoi_cdf(&self, psi: f64) -> Result<f64> {
        if !(psi >= 0.0) {
            return Err(Error::Domain(format!("PAoI must be nonnegative, got {psi}")));
        }
        if psi < self.period {
            return Ok(0.0);
        }
        let whole = (psi / self.period).floor();
        let rest = (psi - whole * self.period).clamp(0.0, self.period);
        let failures = (1.0 - self.success).powf(whole - 1.0);
        Ok((1.0 - failures * (1.0 - self.success * self.latency_cdf(rest)?)).clamp(0.0, 1.0))
    }

    /// Number of periods after which the PAoI tail falls below `1e-9`.
    pub fn tail_periods(&self) -> usize {
        tail_periods(1.0 - self.success)
    }

    /// PAoI CDF on `points_per_period` points per period up to the
    /// truncation horizon.
    pub fn paoi_curve(&self, points_per_period: usize) -> Result<DistributionCurve> {
        let periods = self.tail_periods() + 1;
        let points = periods * points_per_period.max(1) + 1;
        let grid = uniform_grid(0.0, periods as f64 * self.period, points);
        DistributionCurve::from_fn(&grid, |psi| self.paoi_cdf(psi))
    }

    /// `Σ_{k<N} (N-k) γ_{k+1}(μτ) / (μ σ N k!)`, shared by `E[T]` and `Δ̄`.
    fn latency_series(&self) -> f64 {
        let n = self.clients;
        let cdf = erlang_cdfs(n, self.rate, self.period);
        (0..n)
            .map(|k| (n - k) as f64 * cdf[k + 1])
            .sum::<f64>()
            / (self.rate * self.success * n as f64)
    }

    /// Mean latency of delivered frames.
    pub fn expected_latency(&self) -> f64 {
        -(1.0 - self.success) * self.period / self.success + self.latency_series()
    }

    /// Time-average AoI, `τ/2 + Σ_k (N-k) γ_{k+1}(μτ) / (μσN k!)`.
    pub fn expected_aoi(&self) -> f64 {
        self.period / 2.0 + self.latency_series()
    }

    /// Time-average AoI assembled from the geometric inter-success time:
    /// `E[Y²]/(2E[Y]) + E[T]` with `E[Y] = τ/σ`, `E[Y²] = τ²(2-σ)/σ²`.
    pub fn expected_aoi_geometric(&self) -> f64 {
        let ey = self.period / self.success;
        let ey2 = self.period * self.period * (2.0 - self.success) / (self.success * self.success);
        ey2 / (2.0 * ey) + self.expected_latency()
    }

    pub fn metrics(&self) -> SyncMetrics {
        SyncMetrics {
            success_probability: self.success,
            expected_latency: self.expected_latency(),
            expected_aoi: self.expected_aoi(),
        }
    }
}

/// `⌈ln(tail) / ln(q)⌉` periods, at least one.
pub(crate) fn tail_periods(failure: f64) -> usize {
    if failure <= 0.0 {
        return 1;
    }
    let periods = (PAOI_TAIL.ln() / failure.ln()).ceil();
    periods.max(1.0) as usize
}
