//! Analysis against simulation: sup-distance of the CDFs to the DKW band,
//! z-tests on success probability and mean AoI.
//!
//! Each batch contributes four checks. The overall confidence is split
//! evenly among them (Bonferroni). CDFs are compared on the samples of the
//! first client of each batch, since samples of clients in the same batch
//! are not independent of each other.

use edge_aoi::analysis::PolicyAnalysis;
use edge_aoi::renewal;
use edge_aoi::simulator::{dkw_band, SimulationReport};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::output::Table;
use crate::{CliResult, Failure};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub batch: usize,
    pub analytical: f64,
    pub empirical: f64,
    /// KS distance, or `|z|` for scalar checks.
    pub statistic: f64,
    pub threshold: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.statistic <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub confidence: f64,
    pub checks: Vec<Check>,
}

impl Validation {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    /// Batches are numbered from 1 in the table.
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["check", "batch", "analytical", "empirical", "statistic", "threshold", "passed"]);
        for c in &self.checks {
            t.push(vec![
                c.name.clone(),
                (c.batch + 1).to_string(),
                c.analytical.to_string(),
                c.empirical.to_string(),
                c.statistic.to_string(),
                c.threshold.to_string(),
                c.passed().to_string(),
            ]);
        }
        t
    }
}

fn z_critical(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Compares `analysis` with `report` at overall `confidence`.
pub fn validate(analysis: &PolicyAnalysis, report: &SimulationReport, confidence: f64) -> CliResult<Validation> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Failure::Usage(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let batches = analysis.batch_count();
    if report.clients.len() != analysis.scenario().n_clients() {
        return Err(Failure::Usage("simulation and analysis describe different client sets".into()));
    }
    let alpha = (1.0 - confidence) / (4 * batches) as f64;
    let z = z_critical(alpha);
    let mut checks = Vec::with_capacity(4 * batches);
    for b in 0..batches {
        let client = report.clients.iter().find(|c| c.batch == b).expect("every batch has a client");
        for (name, samples) in [("latency-ks", &client.latency), ("paoi-ks", &client.paoi)] {
            if samples.is_empty() {
                return Err(Failure::Validation(format!("batch {} delivered no frames", b + 1)));
            }
            let d = if name == "latency-ks" {
                samples.ks_distance(|t| analysis.latency_cdf(b, t.min(analysis.scenario().period())))?
            } else {
                samples.ks_distance(|psi| analysis.paoi_cdf(b, psi))?
            };
            checks.push(Check {
                name: name.into(),
                batch: b,
                analytical: f64::NAN,
                empirical: f64::NAN,
                statistic: d,
                threshold: dkw_band(samples.len(), 1.0 - alpha)?,
            });
        }
        let sigma = analysis.batch_success(b)?;
        let est = report.success_rate(Some(b));
        checks.push(Check {
            name: "success-z".into(),
            batch: b,
            analytical: sigma,
            empirical: est,
            statistic: ((est - sigma) / report.success_rate_se(Some(b))).abs(),
            threshold: z,
        });
        let aoi = renewal::moments(analysis, b)?.expected_aoi;
        let est = report.expected_aoi(Some(b));
        checks.push(Check {
            name: "aoi-z".into(),
            batch: b,
            analytical: aoi,
            empirical: est,
            statistic: ((est - aoi) / report.expected_aoi_se(Some(b))).abs(),
            threshold: z,
        });
    }
    Ok(Validation { confidence, checks })
}
