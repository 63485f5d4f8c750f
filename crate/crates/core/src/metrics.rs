//! Sampled distribution curves, percentiles and Jain's fairness index.

use serde::Serialize;

use crate::error::{Error, Result};

/// Probabilities may exceed `[0, 1]` or decrease by this much from rounding.
const PROBABILITY_SLACK: f64 = 1e-9;

/// A CDF sampled at strictly increasing abscissas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionCurve {
    points: Vec<(f64, f64)>,
}

impl DistributionCurve {
    /// Validates the points. Rounding-level violations (below `1e-9`) are
    /// repaired; anything larger is an error.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("a distribution curve needs at least one point".into()));
        }
        let mut running = 0.0_f64;
        let mut prev_x = f64::NEG_INFINITY;
        for (x, p) in points.iter_mut() {
            if !x.is_finite() || *x <= prev_x {
                return Err(Error::Domain(format!("abscissa {x} is not strictly increasing")));
            }
            prev_x = *x;
            if !p.is_finite() || *p < -PROBABILITY_SLACK || *p > 1.0 + PROBABILITY_SLACK {
                return Err(Error::Inconsistent(format!("probability {p} at {x} outside [0, 1]")));
            }
            if *p < running - PROBABILITY_SLACK {
                return Err(Error::Inconsistent(format!("CDF decreases at {x}: {p} < {running}")));
            }
            *p = p.clamp(running, 1.0);
            running = *p;
        }
        Ok(Self { points })
    }

    /// Evaluates `cdf` on `grid`.
    pub fn from_fn(grid: &[f64], mut cdf: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        let points = grid.iter().map(|&x| cdf(x).map(|p| (x, p))).collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn abscissas(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn last(&self) -> (f64, f64) {
        *self.points.last().expect("curves are never empty")
    }

    /// Right-continuous step interpolation: the probability at the largest
    /// abscissa `<= x`, zero before the first one.
    pub fn value_at(&self, x: f64) -> f64 {
        match self.points.partition_point(|p| p.0 <= x) {
            0 => 0.0,
            i => self.points[i - 1].1,
        }
    }

    /// Largest probability gap against a curve on the same grid.
    pub fn max_abs_difference(&self, other: &DistributionCurve) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Domain("curves have different grids".into()));
        }
        let mut worst = 0.0_f64;
        for (a, b) in self.points.iter().zip(&other.points) {
            if (a.0 - b.0).abs() > 1e-12 * a.0.abs().max(1.0) {
                return Err(Error::Domain(format!("grid mismatch at {} vs {}", a.0, b.0)));
            }
            worst = worst.max((a.1 - b.1).abs());
        }
        Ok(worst)
    }

    /// CSV body with a `t,probability` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,probability\n");
        for (x, p) in &self.points {
            out.push_str(&format!("{x},{p}\n"));
        }
        out
    }
}

/// `points` evenly spaced abscissas from `start` to `end` inclusive.
pub fn uniform_grid(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (points - 1) as f64;
            (0..points)
                .map(|i| if i + 1 == points { end } else { start + step * i as f64 })
                .collect()
        }
    }
}

fn check_percentile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 100.0) {
        return Err(Error::Domain(format!("percentile must lie in (0, 100), got {p}")));
    }
    Ok(p / 100.0)
}

/// Smallest abscissa whose probability reaches `p/100` (left-continuous
/// inverse of the sampled CDF).
pub fn percentile(curve: &DistributionCurve, p: f64) -> Result<f64> {
    let q = check_percentile(p)?;
    curve
        .points
        .iter()
        .find(|(_, prob)| *prob >= q - 1e-12)
        .map(|(x, _)| *x)
        .ok_or_else(|| Error::Domain(format!("curve never reaches probability {q}")))
}

/// Empirical percentile: the `⌈n p/100⌉`-th smallest sample.
pub fn sample_percentile(samples: &[f64], p: f64) -> Result<f64> {
    let q = check_percentile(p)?;
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Left-continuous inverse of a continuous CDF by bisection on `[lo, hi]`,
/// to absolute precision `tol`.
pub fn quantile(mut cdf: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, p: f64, tol: f64) -> Result<f64> {
    let q = check_percentile(p)?;
    if cdf(hi)? < q {
        return Err(Error::Domain(format!("CDF stays below {q} up to {hi}")));
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if cdf(mid)? >= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Jain's fairness index `(Σx)² / (n Σx²)`.
pub fn jain_index(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("fairness index of an empty set".into()));
    }
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("fairness index needs positive values, got {bad}")));
    }
    let sum: f64 = values.iter().sum();
    let squares: f64 = values.iter().map(|v| v * v).sum();
    Ok(sum * sum / (values.len() as f64 * squares))
}
