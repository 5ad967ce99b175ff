use std::fmt;

use thiserror::Error;

/// A single structural problem found while validating an instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NoBins,
    TooManyBins { d: usize, max: usize },
    DuplicateBinId(String),
    DuplicateItemId(String),
    NegativeCapacity { bin: String, capacity: i64 },
    NonPositiveSize { item: String, size: i64 },
    MissingEmptyOption(String),
    MaskOutOfRange { item: String, mask: u32, d: usize },
    NegativeCost { item: String, mask: u32, cost: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoBins => write!(f, "instance has no bins"),
            Violation::TooManyBins { d, max } => write!(f, "{d} bins exceeds the limit of {max}"),
            Violation::DuplicateBinId(id) => write!(f, "bin {id}: duplicate id"),
            Violation::DuplicateItemId(id) => write!(f, "item {id}: duplicate id"),
            Violation::NegativeCapacity { bin, capacity } => {
                write!(f, "bin {bin}: negative capacity {capacity}")
            }
            Violation::NonPositiveSize { item, size } => {
                write!(f, "item {item}: size {size} must be at least 1")
            }
            Violation::MissingEmptyOption(id) => write!(f, "item {id}: missing empty-set option"),
            Violation::MaskOutOfRange { item, mask, d } => {
                write!(f, "item {item}: mask {mask} out of range for {d} bins")
            }
            Violation::NegativeCost { item, mask, cost } => {
                write!(f, "item {item}: negative cost {cost} on mask {mask}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {}", join(.0))]
    Validation(Vec<Violation>),
    #[error("instance is already padded")]
    AlreadyPadded,
    #[error("instance must be padded first")]
    NotPadded,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("profile cache rejected: {0}")]
    Catalog(String),
    #[error("catalog dimension {catalog} does not match instance dimension {instance}")]
    DimensionMismatch { catalog: usize, instance: usize },
    #[error("oracle guard: {0}")]
    Guard(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("iteration budget of {budget} exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
