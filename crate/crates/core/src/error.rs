use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degree {0} outside the unit interval")]
    DegreeOutOfRange(f64),
    #[error("empty aggregation")]
    EmptyAggregation,
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("field dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("alpha cut requires 0 < alpha <= 1, got {0}")]
    InvalidAlpha(f64),
    #[error("empty reference object")]
    EmptyReference,
    #[error("invalid distance radii: near {near} must be >= 0 and < far {far}")]
    InvalidRadii { near: f64, far: f64 },
    #[error("degenerate intersection: a field sums to zero")]
    DegenerateIntersection,
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
    #[error("invalid segment set: {0}")]
    SegmentSet(String),
    #[error("image {image}: missing label {label}")]
    MissingLabel { image: String, label: String },
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("invalid threshold {0}: must lie in (0, 1]")]
    InvalidThreshold(f64),
    #[error("no constraints learned")]
    NoConstraints,
    #[error("variable/label count mismatch: {variables} segments for {labels} labels")]
    CountMismatch { variables: usize, labels: usize },
    #[error("label {0} is not assigned in the solution")]
    Unassigned(String),
    #[error("missing evaluation for relation {0}")]
    MissingEvaluation(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("invalid hedge scale: {0}")]
    HedgeScale(String),
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("synthetic placement failed after {0} attempts; reduce the jitter")]
    Placement(usize),
    #[error("dataset too small: {0}")]
    TooSmall(String),
    #[error("mismatched counts: {0} predictions vs {1} ground-truth labels")]
    AccuracyMismatch(usize, usize),
    #[error("empty prediction set")]
    EmptyPredictions,
    #[error("invalid tuning configuration: {0}")]
    Tuning(String),
    #[error("search range too high: every candidate threshold vector yields zero constraints")]
    SearchRangeTooHigh,
    #[error("model file: {0}")]
    Model(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
