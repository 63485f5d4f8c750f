//! Timeliness analysis of periodic clients sharing a preemptive edge server.
//!
//! `N` clients generate one frame every period `τ`, grouped into `B` batches
//! offset in time. Frames need an exponential amount of work at rate `μ` and a
//! frame still unfinished when its client generates the next one is dropped.
//! The server runs either generalized processor sharing ([`Policy::Gps`]) or
//! first-in first-out ([`Policy::Fifo`]).
//!
//! The crate computes, exactly:
//!
//! * success probabilities per state and per batch,
//! * the latency CDF of delivered frames,
//! * the peak Age of Information (PAoI) CDF,
//! * the time-average Age of Information (AoI),
//!
//! through closed forms for the synchronized case ([`sync_analysis`]) and a
//! Markov chain embedded at batch epochs for the general case ([`analysis`],
//! [`renewal`]). The discrete-event [`simulator`] shares nothing with the
//! analytical code besides [`Scenario`] and serves as the oracle that checks it.
//!
//! ```
//! use edge_aoi::{analysis, renewal, Policy, Scenario};
//!
//! let scenario = Scenario::uniform(8, 10.0, 1.0, 4).unwrap();
//! let gps = analysis::analyze(&scenario, Policy::Gps).unwrap();
//! let aoi = renewal::expected_aoi(&gps).unwrap();
//! assert!(aoi > 0.5 && aoi < 3.0);
//! ```

pub mod analysis;
mod error;
pub mod metrics;
pub mod numerics;
pub mod renewal;
pub mod scenario;
pub mod simulator;
pub mod sync_analysis;

pub use analysis::PolicyAnalysis;
pub use error::{Error, Result};
pub use metrics::DistributionCurve;
pub use scenario::{Policy, RawScenario, Scenario};
