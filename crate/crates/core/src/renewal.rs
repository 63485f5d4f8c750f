//! Mean AoI from the renewal structure of deliveries.
//!
//! For a client of batch `b`, let `Y` be the time between the generation of
//! two consecutive delivered frames (a multiple of `τ`) and `T` the latency
//! of the second one. The mean AoI is `E[Y²]/(2E[Y]) + E[TY]/E[Y]`.
//!
//! Starting from the generating state of a delivered frame (law `w`), the
//! next delivery comes after `m` periods with probability
//! `w P_D P_D̄^{m-1} σ`, which gives
//!
//! * `E[Y]  = τ  w P_D (I - P_D̄)^{-2} σ`
//! * `E[Y²] = τ² w P_D (I + P_D̄)(I - P_D̄)^{-3} σ`
//! * `E[TY] = τ  w P_D (I - P_D̄)^{-2} (σ ⊙ E[T|S])`

use nalgebra::DVector;
use serde::Serialize;

use crate::analysis::PolicyAnalysis;
use crate::error::{Error, Result};
use crate::numerics::{neumann_first_moment, neumann_second_moment};

/// Renewal moments of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenewalMoments {
    pub mean_gap: f64,
    pub second_moment: f64,
    pub cross_moment: f64,
    pub expected_aoi: f64,
}

impl RenewalMoments {
    fn new(mean_gap: f64, second_moment: f64, cross_moment: f64) -> Self {
        Self {
            mean_gap,
            second_moment,
            cross_moment,
            expected_aoi: second_moment / (2.0 * mean_gap) + cross_moment / mean_gap,
        }
    }
}

/// Moments from direct summation of the first terms of each series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedMoments {
    pub moments: RenewalMoments,
    pub terms: usize,
    /// Probability mass of gaps longer than `terms` periods.
    pub tail: f64,
}

/// Law of the generating state of the frame after a delivery, and the
/// per-state delivery probability.
fn start(analysis: &PolicyAnalysis, b: usize) -> Result<(DVector<f64>, &DVector<f64>)> {
    let weights = analysis.success_weights(b)?;
    Ok((analysis.given_success(b)?.tr_mul(weights), analysis.state_success(b)?))
}

/// `P(Y = mτ)` for clients of batch `b`.
pub fn inter_success_pmf(analysis: &PolicyAnalysis, b: usize, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("inter-delivery gaps are at least one period".into()));
    }
    let (mut v, sigma) = start(analysis, b)?;
    let failure = analysis.failure_matrix(b)?;
    for _ in 1..m {
        v = failure.tr_mul(&v);
    }
    Ok(v.dot(sigma))
}

/// Exact moments through the Neumann closed forms.
pub fn moments(analysis: &PolicyAnalysis, b: usize) -> Result<RenewalMoments> {
    let (v, sigma) = start(analysis, b)?;
    let failure = analysis.failure_matrix(b)?;
    let tau = analysis.scenario().period();
    let first = neumann_first_moment(failure)?.tr_mul(&v);
    let second = neumann_second_moment(failure)?.tr_mul(&v);
    let latency = sigma.component_mul(analysis.expected_latency_given_state(b)?);
    Ok(RenewalMoments::new(tau * first.dot(sigma), tau * tau * second.dot(sigma), tau * first.dot(&latency)))
}

/// Moments by summing the series term by term, stopping after `max_terms`
/// periods or once the remaining mass drops below `1e-12`.
pub fn truncated_moments(analysis: &PolicyAnalysis, b: usize, max_terms: usize) -> Result<TruncatedMoments> {
    let (mut v, sigma) = start(analysis, b)?;
    let failure = analysis.failure_matrix(b)?;
    let tau = analysis.scenario().period();
    let latency = sigma.component_mul(analysis.expected_latency_given_state(b)?);
    let (mut ey, mut ey2, mut ety) = (0.0, 0.0, 0.0);
    let mut terms = 0;
    while terms < max_terms && v.sum() > 1e-12 {
        terms += 1;
        let m = terms as f64;
        let p = v.dot(sigma);
        ey += m * tau * p;
        ey2 += m * m * tau * tau * p;
        ety += m * tau * v.dot(&latency);
        v = failure.tr_mul(&v);
    }
    Ok(TruncatedMoments { moments: RenewalMoments::new(ey, ey2, ety), terms, tail: v.sum() })
}

/// Mean AoI of each batch.
pub fn batch_aoi(analysis: &PolicyAnalysis) -> Result<Vec<f64>> {
    (0..analysis.batch_count())
        .map(|b| moments(analysis, b).map(|m| m.expected_aoi))
        .collect()
}

/// Mean AoI averaged over clients (batches weighted by size).
pub fn expected_aoi(analysis: &PolicyAnalysis) -> Result<f64> {
    let scenario = analysis.scenario();
    let per_batch = batch_aoi(analysis)?;
    Ok(per_batch
        .iter()
        .enumerate()
        .map(|(b, aoi)| scenario.batch_size(b) as f64 * aoi)
        .sum::<f64>()
        / scenario.n_clients() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::analyze;
    use crate::sync_analysis::SyncSystem;
    use crate::{Policy, Scenario};

    #[test]
    fn synchronized_gaps_are_geometric() {
        let scenario = Scenario::synchronized(5, 4.0, 1.0).unwrap();
        let sigma = SyncSystem::from_scenario(&scenario).unwrap().success_probability();
        let a = analyze(&scenario, Policy::Gps).unwrap();
        for m in 1..6 {
            let expected = sigma * (1.0 - sigma).powi(m as i32 - 1);
            assert!((inter_success_pmf(&a, 0, m).unwrap() - expected).abs() < 1e-12);
        }
        assert!(inter_success_pmf(&a, 0, 0).is_err());
    }

    #[test]
    fn synchronized_moments_factorize() {
        let scenario = Scenario::synchronized(6, 3.0, 1.0).unwrap();
        let sync = SyncSystem::from_scenario(&scenario).unwrap();
        let sigma = sync.success_probability();
        for policy in Policy::ALL {
            let m = moments(&analyze(&scenario, policy).unwrap(), 0).unwrap();
            assert!((m.mean_gap - 1.0 / sigma).abs() < 1e-10);
            assert!((m.second_moment - (2.0 - sigma) / (sigma * sigma)).abs() < 1e-9);
            assert!((m.cross_moment - sync.expected_latency() * m.mean_gap).abs() < 1e-10);
            assert!((m.expected_aoi - sync.expected_aoi()).abs() < 1e-8);
        }
    }

    #[test]
    fn pmf_sums_to_one() {
        let scenario = Scenario::uniform(6, 4.0, 1.5, 3).unwrap();
        let a = analyze(&scenario, Policy::Fifo).unwrap();
        for b in 0..3 {
            let total: f64 = (1..200).map(|m| inter_success_pmf(&a, b, m).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "{total}");
        }
    }

    #[test]
    fn moment_invariants() {
        let scenario = Scenario::uniform(4, 2.0, 1.0, 2).unwrap();
        for policy in Policy::ALL {
            let a = analyze(&scenario, policy).unwrap();
            for b in 0..2 {
                let m = moments(&a, b).unwrap();
                assert!(m.mean_gap >= 1.0);
                assert!(m.second_moment >= m.mean_gap * m.mean_gap);
                assert!(m.expected_aoi >= m.second_moment / (2.0 * m.mean_gap));
            }
        }
    }
}
