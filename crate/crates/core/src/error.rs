use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SensingError>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate prior: singular value {value:e} of mode {mode} is too small to invert; lower r1")]
    DegeneratePrior { mode: usize, value: f64 },

    #[error("ill-conditioned {what}: condition estimate {condition:e} exceeds {limit:e}")]
    IllConditioned {
        what: &'static str,
        condition: f64,
        limit: f64,
    },

    #[error(
        "singular sensor noise covariance (condition estimate {condition:e}); \
         check low-RMS candidate exclusion"
    )]
    SingularNoise { condition: f64 },

    #[error("selection step {step} infeasible: all {skipped} eligible candidates were skipped")]
    StepInfeasible { step: usize, skipped: usize },

    #[error("only {eligible} eligible candidates, {required} required")]
    InfeasibleCandidates { eligible: usize, required: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("snapshot column {column} has zero norm")]
    ZeroNormColumn { column: usize },

    #[error("bad magic in {path}: not a matrix file")]
    BadMagic { path: PathBuf },

    #[error("truncated matrix file {path}: {detail}")]
    TruncatedFile { path: PathBuf, detail: String },

    #[error("non-numeric cell {value:?} at line {line}, column {column} of {path}")]
    NonNumericCell {
        path: PathBuf,
        line: usize,
        column: usize,
        value: String,
    },

    #[error("non-finite value at line {line}, column {column} of {path}")]
    NonFiniteCell { path: PathBuf, line: usize, column: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("snapshot {snapshot} has {found} valid active cells, mask has {expected}")]
    ActiveCellMismatch {
        snapshot: usize,
        found: usize,
        expected: usize,
    },

    #[error("{method} p={p} seed={seed}: {source}")]
    Run {
        method: String,
        p: usize,
        seed: u64,
        #[source]
        source: Box<SensingError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SensingError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SensingError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        use SensingError::*;
        match self {
            IllConditioned { .. }
            | SingularNoise { .. }
            | StepInfeasible { .. }
            | Numerical(_)
            | DegeneratePrior { .. }
            | ZeroNormColumn { .. } => ErrorKind::Numerical,
            Io { .. } => ErrorKind::Io,
            Run { source, .. } => source.kind(),
            _ => ErrorKind::Config,
        }
    }
}
