//! Parameter sweeps and the drift (coherence) study.

use std::fmt;
use std::str::FromStr;
use std::thread;

use edge_aoi::analysis::{self, PolicyAnalysis};
use edge_aoi::metrics::{jain_index, quantile};
use edge_aoi::{renewal, Policy, RawScenario, Scenario};

use crate::{CliResult, Failure};

/// Smallest admissible coherence; `ξ = 0` would merge two batches.
pub const XI_MIN: f64 = 0.01;

/// Quantiles are bisected to this fraction of the period.
const QUANTILE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// Mean AoI.
    Aoi,
    /// Success probability.
    Success,
    /// Mean latency of delivered frames.
    Latency,
    /// PAoI percentile `Ψ_p`.
    PaoiPercentile(f64),
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aoi" => Ok(Metric::Aoi),
            "success" => Ok(Metric::Success),
            "latency" => Ok(Metric::Latency),
            _ => s
                .strip_prefix("paoi-p")
                .and_then(|p| p.parse::<f64>().ok())
                .filter(|p| *p > 0.0 && *p < 100.0)
                .map(Metric::PaoiPercentile)
                .ok_or_else(|| format!("unknown metric `{s}` (aoi, success, latency, paoi-p<percentile>)")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Aoi => f.write_str("aoi"),
            Metric::Success => f.write_str("success"),
            Metric::Latency => f.write_str("latency"),
            Metric::PaoiPercentile(p) => write!(f, "paoi-p{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Tau,
    Mu,
    N,
}

impl FromStr for Parameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tau" => Ok(Parameter::Tau),
            "mu" => Ok(Parameter::Mu),
            "N" | "n" => Ok(Parameter::N),
            _ => Err(format!("unknown sweep parameter `{s}` (tau, mu, N)")),
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parameter::Tau => "tau",
            Parameter::Mu => "mu",
            Parameter::N => "N",
        })
    }
}

/// `steps` evenly spaced values from `from` to `to`.
pub fn linspace(from: f64, to: f64, steps: usize) -> CliResult<Vec<f64>> {
    if steps == 0 || !from.is_finite() || !to.is_finite() || (steps > 1 && from > to) {
        return Err(Failure::Usage(format!("invalid range {from}..{to} with {steps} steps")));
    }
    Ok(edge_aoi::metrics::uniform_grid(from, to, steps))
}

/// `steps` geometrically spaced values from `from` to `to`.
pub fn geomspace(from: f64, to: f64, steps: usize) -> CliResult<Vec<f64>> {
    if !(from > 0.0) {
        return Err(Failure::Usage(format!("geometric range must start above 0, got {from}")));
    }
    Ok(linspace(from.ln(), to.ln(), steps)?.into_iter().map(f64::exp).collect())
}

fn equal_offsets(s: &Scenario) -> bool {
    let nu = s.period() / s.batch_count() as f64;
    s.offsets().iter().all(|o| (o - nu).abs() <= 1e-9 * s.period())
}

/// The base scenario with one parameter replaced. Changing `N` is only
/// defined for synchronized scenarios and for one client per batch with
/// equal offsets.
pub fn scenario_at(base: &Scenario, parameter: Parameter, value: f64) -> CliResult<Scenario> {
    Ok(match parameter {
        Parameter::Tau => base.with_period(value)?,
        Parameter::Mu => base.with_service_rate(value)?,
        Parameter::N => {
            let n = value.round();
            if !(n >= 1.0) {
                return Err(Failure::Usage(format!("client count must be positive, got {value}")));
            }
            let n = n as usize;
            if base.is_synchronized() {
                Scenario::synchronized(n, base.service_rate(), base.period())?
            } else if base.batch_count() == base.n_clients() && equal_offsets(base) {
                Scenario::uniform(n, base.service_rate(), base.period(), n)?
            } else {
                return Err(Failure::Usage(
                    "sweeping N needs a synchronized scenario or one client per batch with equal offsets".into(),
                ));
            }
        }
    })
}

/// Upper end for PAoI quantile searches of one batch.
fn paoi_upper(a: &PolicyAnalysis, batch: Option<usize>) -> CliResult<f64> {
    let horizon = match batch {
        Some(b) => a.paoi_horizon(b)?,
        None => (0..a.batch_count()).map(|b| a.paoi_horizon(b)).collect::<Result<Vec<_>, _>>()?.into_iter().max().unwrap_or(1),
    };
    Ok((horizon + 2) as f64 * a.scenario().period())
}

/// `Ψ_p` of a batch, or over all deliveries.
pub fn paoi_percentile(a: &PolicyAnalysis, batch: Option<usize>, p: f64) -> CliResult<f64> {
    let hi = paoi_upper(a, batch)?;
    let tol = QUANTILE_TOL * a.scenario().period();
    Ok(match batch {
        Some(b) => quantile(|x| a.paoi_cdf(b, x), 0.0, hi, p, tol)?,
        None => quantile(|x| a.mixed_paoi_cdf(x), 0.0, hi, p, tol)?,
    })
}

/// Value of `metric` for one batch, or aggregated over clients.
pub fn metric_value(a: &PolicyAnalysis, metric: Metric, batch: Option<usize>) -> CliResult<f64> {
    let s = a.scenario();
    Ok(match (metric, batch) {
        (Metric::Aoi, Some(b)) => renewal::moments(a, b)?.expected_aoi,
        (Metric::Aoi, None) => renewal::expected_aoi(a)?,
        (Metric::Success, Some(b)) => a.batch_success(b)?,
        (Metric::Success, None) => a.success_rate(),
        (Metric::Latency, Some(b)) => a.batch_expected_latency(b)?,
        (Metric::Latency, None) => {
            let mut num = 0.0;
            let mut den = 0.0;
            for b in 0..s.batch_count() {
                let w = s.batch_size(b) as f64 * a.batch_success(b)?;
                num += w * a.batch_expected_latency(b)?;
                den += w;
            }
            num / den
        }
        (Metric::PaoiPercentile(p), batch) => paoi_percentile(a, batch, p)?,
    })
}

/// Maps `f` over `items` on a scoped worker pool, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameter: Parameter,
    pub value: f64,
    pub policy: Policy,
    pub metric: Metric,
    pub result: f64,
}

/// One row per (value, policy, metric), in that nesting order.
pub fn sweep(
    base: &Scenario,
    parameter: Parameter,
    values: &[f64],
    metrics: &[Metric],
    policies: &[Policy],
) -> CliResult<Vec<SweepRow>> {
    let mut values = values.to_vec();
    if parameter == Parameter::N {
        values.iter_mut().for_each(|v| *v = v.round());
        values.dedup();
    }
    let points: Vec<(f64, Policy)> = values.iter().flat_map(|&v| policies.iter().map(move |&p| (v, p))).collect();
    let results = parallel_map(&points, |&(value, policy)| -> CliResult<Vec<SweepRow>> {
        let a = analysis::analyze(&scenario_at(base, parameter, value)?, policy)?;
        metrics
            .iter()
            .map(|&metric| {
                Ok(SweepRow { parameter, value, policy, metric, result: metric_value(&a, metric, None)? })
            })
            .collect()
    });
    Ok(results.into_iter().collect::<CliResult<Vec<_>>>()?.into_iter().flatten().collect())
}

/// Scenario with client 1 drifted: `ν_1 = ξν` and `ν_2 = (2 - ξ)ν`, all
/// other gaps `ν = τ/N`.
pub fn drift_scenario(base: &Scenario, xi: f64, period: f64) -> CliResult<Scenario> {
    let n = base.n_clients();
    if n < 2 || base.batch_count() != n || !equal_offsets(base) {
        return Err(Failure::Usage(
            "drift needs at least two clients, one per batch, with equal offsets".into(),
        ));
    }
    if !(XI_MIN..=1.0).contains(&xi) {
        return Err(Failure::Usage(format!("coherence must lie in [{XI_MIN}, 1], got {xi}")));
    }
    let nu = period / n as f64;
    let mut offsets = vec![nu; n - 1];
    offsets[0] = (2.0 - xi) * nu;
    Ok(Scenario::try_from(RawScenario {
        n_clients: n,
        service_rate: base.service_rate(),
        period,
        batch_sizes: vec![1; n],
        offsets_from_2: offsets,
    })?)
}

/// Grid point minimizing `Ψ_p` of the undrifted system, with that minimum.
pub fn optimal_period(base: &Scenario, policy: Policy, p: f64, grid: &[f64]) -> CliResult<(f64, f64)> {
    let values = parallel_map(grid, |&tau| -> CliResult<f64> {
        let a = analysis::analyze(&drift_scenario(base, 1.0, tau)?, policy)?;
        paoi_percentile(&a, Some(0), p)
    });
    let mut best = (f64::NAN, f64::INFINITY);
    for (&tau, v) in grid.iter().zip(values) {
        let v = v?;
        if v < best.1 {
            best = (tau, v);
        }
    }
    if best.0.is_nan() {
        return Err(Failure::Usage("empty period grid".into()));
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftRow {
    pub policy: Policy,
    pub xi: f64,
    pub period: f64,
    /// `Ψ_p` of clients `1..=N`.
    pub per_client: Vec<f64>,
    pub jain: f64,
}

/// Per-client `Ψ_p` and fairness for each coherence value, with the
/// period of each policy fixed at its undrifted optimum on `period_grid`.
pub fn drift(base: &Scenario, xis: &[f64], p: f64, period_grid: &[f64]) -> CliResult<Vec<DriftRow>> {
    let mut rows = Vec::new();
    for policy in Policy::ALL {
        let (period, _) = optimal_period(base, policy, p, period_grid)?;
        let computed = parallel_map(xis, |&xi| -> CliResult<DriftRow> {
            let a = analysis::analyze(&drift_scenario(base, xi, period)?, policy)?;
            let per_client = (0..base.n_clients())
                .map(|b| paoi_percentile(&a, Some(b), p))
                .collect::<CliResult<Vec<_>>>()?;
            let jain = jain_index(&per_client)?;
            Ok(DriftRow { policy, xi, period, per_client, jain })
        });
        for row in computed {
            rows.push(row?);
        }
    }
    Ok(rows)
}
