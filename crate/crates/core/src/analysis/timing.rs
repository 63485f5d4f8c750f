//! Cyclic batch timing. Batches are indexed from 0; indices past `B - 1`
//! wrap around the period.

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Time from a generation of batch `from` to the next generation of batch
/// `to`, `τ(b, b′)`. Zero when `from == to`.
pub fn batch_gap(scenario: &Scenario, from: usize, to: usize) -> f64 {
    let b = scenario.batch_count();
    let (from, to) = (from % b, to % b);
    let steps = (to + b - from) % b;
    (1..=steps).map(|k| scenario.offset(from + k)).sum()
}

/// Number of further batch epochs in `(0, t]` after batch `from` generates
/// at time 0. At `t = τ` batch `from` itself generates again, giving `B`.
pub(crate) fn epochs_within(scenario: &Scenario, from: usize, t: f64) -> usize {
    let mut elapsed = 0.0;
    let mut k = 0;
    while k < scenario.batch_count() {
        let next = elapsed + scenario.offset(from + k + 1);
        // Tolerance keeps a grid point sitting on an epoch from rounding
        // into the previous gap.
        if next > t + 1e-12 * scenario.period() {
            break;
        }
        elapsed = next;
        k += 1;
    }
    k
}

/// `β_b(t)`: the last batch generated at or before `t`, when batch `from`
/// generates at 0. Wrapped into `0..B`.
pub fn batch_index_after(scenario: &Scenario, from: usize, t: f64) -> Result<usize> {
    if !(0.0..=scenario.period()).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, {}]", scenario.period())));
    }
    Ok((from + epochs_within(scenario, from, t)) % scenario.batch_count())
}

/// Segment of `[0, τ]` holding `t`: returns `(k, t - τ(b, b+k))` with
/// `k < B`. The endpoint `τ` belongs to the last segment.
pub(crate) fn segment_of(scenario: &Scenario, from: usize, t: f64) -> (usize, f64) {
    let k = epochs_within(scenario, from, t).min(scenario.batch_count() - 1);
    let start: f64 = (1..=k).map(|i| scenario.offset(from + i)).sum();
    (k, (t - start).clamp(0.0, scenario.offset(from + k + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_gaps() {
        let s = Scenario::uniform(4, 1.0, 1.0, 4).unwrap();
        assert_eq!(batch_index_after(&s, 0, 0.0).unwrap(), 0);
        assert_eq!(batch_index_after(&s, 0, 0.3).unwrap(), 1);
        assert_eq!(batch_index_after(&s, 3, 0.3).unwrap(), 0);
        assert_eq!(batch_index_after(&s, 2, 1.0).unwrap(), 2);
        assert!(batch_index_after(&s, 0, 1.5).is_err());
        assert_eq!(batch_gap(&s, 1, 1), 0.0);
        assert!((batch_gap(&s, 0, 3) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gap_wraps_around() {
        let raw = crate::RawScenario {
            n_clients: 2,
            service_rate: 1.0,
            period: 1.0,
            batch_sizes: vec![1, 1],
            offsets_from_2: vec![0.3],
        };
        let s = Scenario::try_from(raw).unwrap();
        assert!((batch_gap(&s, 1, 0) - 0.7).abs() < 1e-15);
        assert!((batch_gap(&s, 0, 1) - 0.3).abs() < 1e-15);
        assert!((batch_gap(&s, 0, 1) + batch_gap(&s, 1, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn segments() {
        let s = Scenario::uniform(4, 1.0, 1.0, 4).unwrap();
        assert_eq!(segment_of(&s, 0, 0.0), (0, 0.0));
        let (k, rest) = segment_of(&s, 0, 0.6);
        assert_eq!(k, 2);
        assert!((rest - 0.1).abs() < 1e-12);
        let (k, rest) = segment_of(&s, 1, 1.0);
        assert_eq!(k, 3);
        assert!((rest - 0.25).abs() < 1e-12);
        // A grid point on an epoch opens the next segment.
        assert_eq!(segment_of(&s, 0, 0.25).0, 1);
    }
}
