//! System configuration shared by the analyses and the simulator.
//!
//! Batches are indexed from 0. Batch 0 is generated at the start of every
//! period; batch `b > 0` follows batch `b - 1` after a gap `offsets()[b]`, and
//! `offsets()[0]` is the gap between the last batch and the next period's
//! batch 0. The gaps always sum to the period.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offsets closer than this to zero (or sums off by more than this) are
/// treated as violations.
const OFFSET_TOLERANCE: f64 = 1e-12;

/// Service discipline of the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Generalized processor sharing: `X` active frames each get rate `μ/X`.
    Gps,
    /// One frame at a time at rate `μ`, in generation order.
    Fifo,
}

impl Policy {
    pub const ALL: [Policy; 2] = [Policy::Gps, Policy::Fifo];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Gps => "gps",
            Policy::Fifo => "fifo",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gps" => Ok(Policy::Gps),
            "fifo" => Ok(Policy::Fifo),
            other => Err(Error::Parse(format!("unknown policy `{other}` (expected gps or fifo)"))),
        }
    }
}

/// Unvalidated scenario, as stored in scenario files.
///
/// `offsets_from_2` holds the gaps preceding batches 2..B (1-based); the gap
/// closing the cycle is always derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub n_clients: usize,
    pub service_rate: f64,
    pub period: f64,
    pub batch_sizes: Vec<usize>,
    #[serde(default)]
    pub offsets_from_2: Vec<f64>,
}

impl RawScenario {
    pub fn validate(&self) -> Result<Scenario> {
        validate(self)
    }
}

/// A validated, normalized system configuration. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    n_clients: usize,
    service_rate: f64,
    period: f64,
    batch_sizes: Vec<usize>,
    offsets: Vec<f64>,
}

/// Checks every scenario invariant and derives the gap closing the cycle.
pub fn validate(raw: &RawScenario) -> Result<Scenario> {
    let invalid = |msg: String| Err(Error::InvalidScenario(msg));

    if raw.n_clients == 0 {
        return invalid("n_clients must be positive".into());
    }
    if !(raw.service_rate.is_finite() && raw.service_rate > 0.0) {
        return invalid(format!("service_rate must be positive, got {}", raw.service_rate));
    }
    if !(raw.period.is_finite() && raw.period > 0.0) {
        return invalid(format!("period must be positive, got {}", raw.period));
    }
    if raw.batch_sizes.is_empty() {
        return invalid("at least one batch is required".into());
    }
    if let Some(b) = raw.batch_sizes.iter().position(|&n| n == 0) {
        return invalid(format!("batch {} is empty", b + 1));
    }
    let total: usize = raw.batch_sizes.iter().sum();
    if total != raw.n_clients {
        return invalid(format!(
            "batch sizes sum to {total} but n_clients is {}",
            raw.n_clients
        ));
    }
    let batches = raw.batch_sizes.len();
    if raw.offsets_from_2.len() != batches - 1 {
        return invalid(format!(
            "expected {} offsets (batches 2..{batches}), got {}",
            batches - 1,
            raw.offsets_from_2.len()
        ));
    }
    for (i, &nu) in raw.offsets_from_2.iter().enumerate() {
        if !nu.is_finite() || nu < 0.0 {
            return invalid(format!("offset of batch {} is negative: {nu}", i + 2));
        }
        if nu <= OFFSET_TOLERANCE {
            return invalid(format!(
                "offset of batch {} is zero; merge it with the previous batch",
                i + 2
            ));
        }
    }
    let inner: f64 = raw.offsets_from_2.iter().sum();
    let closing = raw.period - inner;
    if closing < -OFFSET_TOLERANCE {
        return invalid(format!(
            "offsets of batches 2..{batches} sum to {inner}, exceeding the period {}",
            raw.period
        ));
    }
    if closing <= OFFSET_TOLERANCE {
        return invalid(format!(
            "derived offset of batch 1 is zero (offsets sum to the period {})",
            raw.period
        ));
    }

    let mut offsets = Vec::with_capacity(batches);
    offsets.push(closing);
    offsets.extend_from_slice(&raw.offsets_from_2);
    Ok(Scenario {
        n_clients: raw.n_clients,
        service_rate: raw.service_rate,
        period: raw.period,
        batch_sizes: raw.batch_sizes.clone(),
        offsets,
    })
}

impl Scenario {
    /// All clients generate at the same instant (`B = 1`).
    pub fn synchronized(n_clients: usize, service_rate: f64, period: f64) -> Result<Self> {
        validate(&RawScenario {
            n_clients,
            service_rate,
            period,
            batch_sizes: vec![n_clients],
            offsets_from_2: Vec::new(),
        })
    }

    /// `batches` batches spaced `period / batches` apart. Sizes differ by at
    /// most one, larger batches first.
    pub fn uniform(n_clients: usize, service_rate: f64, period: f64, batches: usize) -> Result<Self> {
        if batches == 0 || batches > n_clients {
            return Err(Error::InvalidScenario(format!(
                "cannot split {n_clients} clients into {batches} batches"
            )));
        }
        let base = n_clients / batches;
        let extra = n_clients % batches;
        let batch_sizes = (0..batches).map(|b| base + usize::from(b < extra)).collect();
        validate(&RawScenario {
            n_clients,
            service_rate,
            period,
            batch_sizes,
            offsets_from_2: vec![period / batches as f64; batches - 1],
        })
    }

    /// Reads a TOML or JSON scenario file (chosen by extension, TOML otherwise).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let raw: RawScenario = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?,
            _ => toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?,
        };
        validate(&raw)
    }

    pub fn to_raw(&self) -> RawScenario {
        RawScenario {
            n_clients: self.n_clients,
            service_rate: self.service_rate,
            period: self.period,
            batch_sizes: self.batch_sizes.clone(),
            offsets_from_2: self.offsets[1..].to_vec(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("scenario serializes")
    }

    pub fn n_clients(&self) -> usize {
        self.n_clients
    }

    pub fn service_rate(&self) -> f64 {
        self.service_rate
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn batch_count(&self) -> usize {
        self.batch_sizes.len()
    }

    pub fn batch_sizes(&self) -> &[usize] {
        &self.batch_sizes
    }

    pub fn batch_size(&self, batch: usize) -> usize {
        self.batch_sizes[batch % self.batch_count()]
    }

    /// Gaps `ν`; `offsets()[b]` precedes batch `b`, `offsets()[0]` closes the cycle.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Gap preceding batch `batch`, with cyclic indexing.
    pub fn offset(&self, batch: usize) -> f64 {
        self.offsets[batch % self.batch_count()]
    }

    /// Generation instant of each batch within a period, batch 0 at 0.
    pub fn batch_starts(&self) -> Vec<f64> {
        let mut starts = Vec::with_capacity(self.batch_count());
        let mut t = 0.0;
        starts.push(t);
        for nu in &self.offsets[1..] {
            t += nu;
            starts.push(t);
        }
        starts
    }

    /// Batch of every client; clients are numbered batch by batch.
    pub fn client_batches(&self) -> Vec<usize> {
        self.batch_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| std::iter::repeat_n(b, n))
            .collect()
    }

    /// Offered load `N / (μτ)`.
    pub fn offered_load(&self) -> f64 {
        self.n_clients as f64 / (self.service_rate * self.period)
    }

    pub fn is_synchronized(&self) -> bool {
        self.batch_count() == 1
    }

    pub fn with_service_rate(&self, service_rate: f64) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.service_rate = service_rate;
        validate(&raw)
    }

    /// Same scenario with the period rescaled, keeping offsets proportional.
    pub fn with_period(&self, period: f64) -> Result<Self> {
        let scale = period / self.period;
        let mut raw = self.to_raw();
        raw.period = period;
        raw.offsets_from_2.iter_mut().for_each(|nu| *nu *= scale);
        validate(&raw)
    }
}

impl TryFrom<RawScenario> for Scenario {
    type Error = Error;

    fn try_from(raw: RawScenario) -> Result<Self> {
        validate(&raw)
    }
}
