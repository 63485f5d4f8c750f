//! Empirical distributions: raw or binned samples, DKW bands and
//! Kolmogorov-Smirnov distances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::DistributionCurve;

/// Bins used once a sample set outgrows its cap.
pub const HISTOGRAM_BINS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Bins {
    counts: Vec<u64>,
    below: u64,
    above: u64,
}

/// Samples of one metric. Values are kept exactly (sorted) up to `cap`,
/// then folded into a fixed histogram over `range`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    cap: usize,
    range: (f64, f64),
    raw: Vec<f64>,
    bins: Option<Bins>,
    total: u64,
    sum: f64,
    sorted: bool,
}

impl SampleSet {
    pub fn new(cap: usize, lo: f64, hi: f64) -> Self {
        Self { cap, range: (lo, hi), raw: Vec::new(), bins: None, total: 0, sum: 0.0, sorted: true }
    }

    pub fn push(&mut self, x: f64) {
        self.total += 1;
        self.sum += x;
        match &mut self.bins {
            Some(_) => self.bin(x),
            None => {
                self.raw.push(x);
                self.sorted = false;
                if self.raw.len() > self.cap {
                    self.fold();
                }
            }
        }
    }

    fn bin_index(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.range;
        if x < lo || x > hi {
            return None;
        }
        Some((((x - lo) / (hi - lo) * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1))
    }

    fn bin(&mut self, x: f64) {
        let idx = self.bin_index(x);
        let below = x < self.range.0;
        let bins = self.bins.as_mut().expect("binned");
        match idx {
            Some(i) => bins.counts[i] += 1,
            None if below => bins.below += 1,
            None => bins.above += 1,
        }
    }

    fn fold(&mut self) {
        self.bins = Some(Bins { counts: vec![0; HISTOGRAM_BINS], below: 0, above: 0 });
        for x in std::mem::take(&mut self.raw) {
            self.bin(x);
        }
        self.sorted = true;
    }

    /// Sorts raw samples; called once collection is over.
    pub fn finish(&mut self) {
        if !self.sorted {
            self.raw.sort_by(f64::total_cmp);
            self.sorted = true;
        }
    }

    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn is_binned(&self) -> bool {
        self.bins.is_some()
    }

    /// Sorted raw samples, unless the set has been binned.
    pub fn values(&self) -> Option<&[f64]> {
        (self.bins.is_none() && self.sorted).then_some(self.raw.as_slice())
    }

    pub fn mean(&self) -> Option<f64> {
        (self.total > 0).then(|| self.sum / self.total as f64)
    }

    fn edges(&self) -> impl Iterator<Item = f64> + '_ {
        let (lo, hi) = self.range;
        (1..=HISTOGRAM_BINS).map(move |i| lo + (hi - lo) * i as f64 / HISTOGRAM_BINS as f64)
    }

    /// Empirical CDF as a step curve. Binned sets place each bin's mass at
    /// its upper edge.
    pub fn curve(&self) -> Result<DistributionCurve> {
        if self.is_empty() {
            return Err(Error::Domain("no samples".into()));
        }
        match &self.bins {
            None => empirical_cdf(&self.sorted_raw()),
            Some(bins) => {
                let n = self.total as f64;
                let mut acc = bins.below;
                let mut points = Vec::with_capacity(HISTOGRAM_BINS + 1);
                for (edge, count) in self.edges().zip(&bins.counts) {
                    acc += count;
                    points.push((edge, acc as f64 / n));
                }
                if bins.above > 0 {
                    points.push((f64::MAX, 1.0));
                }
                DistributionCurve::new(points)
            }
        }
    }

    fn sorted_raw(&self) -> std::borrow::Cow<'_, [f64]> {
        if self.sorted {
            std::borrow::Cow::Borrowed(&self.raw)
        } else {
            let mut v = self.raw.clone();
            v.sort_by(f64::total_cmp);
            std::borrow::Cow::Owned(v)
        }
    }

    /// Fraction of samples `<= x`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let count = match &self.bins {
            None => self.sorted_raw().partition_point(|&v| v <= x) as u64,
            Some(bins) => {
                let full = self.edges().take_while(|&e| e <= x).count();
                bins.below + bins.counts[..full].iter().sum::<u64>() + if x >= f64::MAX { bins.above } else { 0 }
            }
        };
        count as f64 / self.total as f64
    }

    /// Sup distance between the empirical CDF and `cdf`, checked on both
    /// sides of every jump.
    pub fn ks_distance(&self, mut cdf: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Domain("no samples".into()));
        }
        let n = self.total as f64;
        let mut worst = 0.0_f64;
        match &self.bins {
            None => {
                let raw = self.sorted_raw();
                let mut i = 0;
                while i < raw.len() {
                    let x = raw[i];
                    let mut j = i;
                    while j < raw.len() && raw[j] == x {
                        j += 1;
                    }
                    let f = cdf(x)?;
                    worst = worst.max((f - i as f64 / n).abs()).max((f - j as f64 / n).abs());
                    i = j;
                }
            }
            Some(bins) => {
                let mut acc = bins.below;
                for (edge, count) in self.edges().zip(&bins.counts) {
                    acc += count;
                    worst = worst.max((cdf(edge)? - acc as f64 / n).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Empirical percentile (`⌈n p/100⌉`-th smallest value; bin upper edge
    /// once binned).
    pub fn percentile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 100.0) {
            return Err(Error::Domain(format!("percentile must lie in (0, 100), got {p}")));
        }
        if self.is_empty() {
            return Err(Error::Domain("no samples".into()));
        }
        let rank = ((p / 100.0 * self.total as f64).ceil() as u64).clamp(1, self.total);
        match &self.bins {
            None => Ok(self.sorted_raw()[rank as usize - 1]),
            Some(bins) => {
                let mut acc = bins.below;
                if acc >= rank {
                    return Ok(self.range.0);
                }
                for (edge, count) in self.edges().zip(&bins.counts) {
                    acc += count;
                    if acc >= rank {
                        return Ok(edge);
                    }
                }
                Ok(f64::INFINITY)
            }
        }
    }

    /// Combines two sample sets of the same metric. The result does not
    /// depend on the order of the operands.
    pub fn merge(&self, other: &SampleSet) -> SampleSet {
        let mut out = SampleSet::new(self.cap.min(other.cap), self.range.0, self.range.1);
        out.total = self.total + other.total;
        out.sum = self.sum + other.sum;
        if self.bins.is_none() && other.bins.is_none() && self.raw.len() + other.raw.len() <= out.cap {
            let mut raw = Vec::with_capacity(self.raw.len() + other.raw.len());
            raw.extend_from_slice(&self.raw);
            raw.extend_from_slice(&other.raw);
            raw.sort_by(f64::total_cmp);
            out.raw = raw;
            return out;
        }
        out.bins = Some(Bins { counts: vec![0; HISTOGRAM_BINS], below: 0, above: 0 });
        for set in [self, other] {
            match &set.bins {
                Some(b) => {
                    let target = out.bins.as_mut().expect("binned");
                    target.below += b.below;
                    target.above += b.above;
                    for (t, c) in target.counts.iter_mut().zip(&b.counts) {
                        *t += c;
                    }
                }
                None => {
                    for &x in &set.raw {
                        out.bin(x);
                    }
                }
            }
        }
        out
    }
}

/// Step CDF of `samples`: one point per distinct value, at the fraction of
/// samples not exceeding it.
pub fn empirical_cdf(samples: &[f64]) -> Result<DistributionCurve> {
    if samples.is_empty() {
        return Err(Error::Domain("empirical CDF of no samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("samples must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == x => last.1 = p,
            _ => points.push((x, p)),
        }
    }
    DistributionCurve::new(points)
}

/// Dvoretzky-Kiefer-Wolfowitz half-width `sqrt(ln(2/α) / (2n))` for
/// confidence `1 - α`.
pub fn dkw_band(n: u64, confidence: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("DKW band needs at least one sample".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let alpha = 1.0 - confidence;
    Ok(((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt())
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &SampleSet, b: &SampleSet) -> Result<(f64, f64)> {
    let (Some(x), Some(y)) = (a.values(), b.values()) else {
        return Err(Error::Domain("two-sample test needs raw sorted samples".into()));
    };
    if x.is_empty() || y.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0_f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    Ok((d, kolmogorov_survival(lambda)))
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dkw_reference_value() {
        let eps = dkw_band(1_000_000, 0.99).unwrap();
        assert!((eps - (200f64.ln() / 2e6).sqrt()).abs() < 1e-15);
        assert!((eps - 0.001629).abs() < 0.001629 * 1e-3, "{eps}");
        assert!(dkw_band(0, 0.99).is_err());
    }

    #[test]
    fn single_sample_step() {
        let curve = empirical_cdf(&[2.5]).unwrap();
        assert_eq!(curve.points(), &[(2.5, 1.0)]);
        assert!(empirical_cdf(&[]).is_err());
    }

    #[test]
    fn ecdf_with_ties() {
        let curve = empirical_cdf(&[3.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!(curve.points(), &[(1.0, 0.5), (2.0, 0.75), (3.0, 1.0)]);
        assert_eq!(curve.last().1, 1.0);
    }

    #[test]
    fn folding_keeps_the_distribution() {
        let mut set = SampleSet::new(100, 0.0, 1.0);
        for i in 0..1000 {
            set.push((i as f64 + 0.5) / 1000.0);
        }
        set.finish();
        assert!(set.is_binned());
        assert_eq!(set.len(), 1000);
        assert!((set.cdf_at(0.5) - 0.5).abs() < 1e-3);
        assert!((set.mean().unwrap() - 0.5).abs() < 1e-12);
        let ks = set.ks_distance(|x| Ok(x.clamp(0.0, 1.0))).unwrap();
        assert!(ks < 2e-3, "{ks}");
        assert!((set.percentile(50.0).unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn ks_against_exact_cdf() {
        let mut set = SampleSet::new(1000, 0.0, 1.0);
        for x in [0.1, 0.2, 0.3, 0.4] {
            set.push(x);
        }
        set.finish();
        let d = set.ks_distance(|x| Ok(x)).unwrap();
        assert!((d - 0.6).abs() < 1e-12);
    }

    #[test]
    fn merge_is_symmetric() {
        let mut a = SampleSet::new(10, 0.0, 1.0);
        let mut b = SampleSet::new(10, 0.0, 1.0);
        for i in 0..4 {
            a.push(i as f64 / 10.0);
            b.push(0.05 + i as f64 / 10.0);
        }
        a.finish();
        b.finish();
        assert_eq!(a.merge(&b), b.merge(&a));
        assert_eq!(a.merge(&b).len(), 8);
        let mut big = SampleSet::new(10, 0.0, 1.0);
        for i in 0..8 {
            big.push(i as f64 / 8.0);
        }
        big.finish();
        let merged = a.merge(&big);
        assert!(merged.is_binned());
        assert_eq!(merged, big.merge(&a));
    }

    #[test]
    fn two_sample_identical_sets() {
        let mut a = SampleSet::new(100, 0.0, 1.0);
        for i in 0..50 {
            a.push(i as f64 / 50.0);
        }
        a.finish();
        let (d, p) = ks_two_sample(&a, &a).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
    }
}
