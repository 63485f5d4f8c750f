//! Library side of the `edge-aoi` command: parameter studies, validation
//! against the simulator, CSV output and run manifests.

pub mod check;
pub mod manifest;
pub mod output;
pub mod study;

use std::fmt;

/// Command failure, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable or invalid input: exit code 1.
    Usage(String),
    /// Analysis and simulation disagree: exit code 2.
    Validation(String),
    /// State space above the enumeration caps: exit code 3.
    ResourceCap(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::ResourceCap(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error: {m}"),
            Failure::Validation(m) => write!(f, "validation failed: {m}"),
            Failure::ResourceCap(m) => write!(f, "resource cap: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<edge_aoi::Error> for Failure {
    fn from(e: edge_aoi::Error) -> Self {
        match e {
            edge_aoi::Error::StateSpaceTooLarge { .. } => Failure::ResourceCap(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;
