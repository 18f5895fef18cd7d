//! Error type shared across the crate.

use thiserror::Error;

/// Temporal-consistency constraints enforced by the evaluation split.
///
/// Violations are reported by name so that a failed experiment setup can be
/// traced to the exact constraint it broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// C1: every training sample must precede every test sample in time.
    TrainBeforeTest,
    /// C2: every test bucket must span exactly one calendar month.
    SingleMonthBuckets,
    /// C3: the malware rate of every test bucket must stay within tolerance
    /// of the configured prevalence.
    TestPrevalence,
}

impl ConstraintKind {
    /// Short code used in error messages and logs.
    pub fn code(self) -> &'static str {
        match self {
            ConstraintKind::TrainBeforeTest => "C1",
            ConstraintKind::SingleMonthBuckets => "C2",
            ConstraintKind::TestPrevalence => "C3",
        }
    }
}

impl std::fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An API precondition was violated (stale caches, rejected samples fed
    /// to classification metrics, and similar misuse).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration value or combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// A sample predates the reward origin month, so its temporal reward
    /// scale would be computed from a negative offset.
    #[error("temporal constraint violated: sample month {sample_month} precedes origin month {origin_month}")]
    TemporalOrder {
        sample_month: u32,
        origin_month: u32,
    },

    /// One of the named evaluation-split constraints failed.
    #[error("constraint {kind} violated: {detail}")]
    Constraint {
        kind: ConstraintKind,
        detail: String,
    },

    /// Malformed input while reading a dataset (bad JSON).
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// Structurally valid input with invalid content (bad label, unsorted
    /// feature indices, index out of range).
    #[error("schema error at line {line}: {detail}")]
    Schema { line: usize, detail: String },

    /// Training produced a non-finite loss; parameters were left untouched.
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),

    /// Training could not run (empty training set, single-class SVM input).
    #[error("training error: {0}")]
    Training(String),

    /// Checkpoint bytes could not be read back (bad magic, version, or
    /// truncation).
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor for [`Error::Constraint`].
    pub fn constraint(kind: ConstraintKind, detail: impl Into<String>) -> Self {
        Error::Constraint {
            kind,
            detail: detail.into(),
        }
    }

    /// The constraint kind, if this is a constraint violation.
    pub fn constraint_kind(&self) -> Option<ConstraintKind> {
        match self {
            Error::Constraint { kind, .. } => Some(*kind),
            _ => None,
        }
    }
}
