use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported schema {found:?}, expected {expected:?}")]
    Schema { found: String, expected: String },

    #[error("{field}: lower bound {lo} exceeds upper bound {hi}")]
    RangeInverted { field: String, lo: f64, hi: f64 },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("{what} {id:?} references unknown {target:?}")]
    Dangling {
        what: &'static str,
        id: String,
        target: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("trajectory has {len} states, need at least {need}")]
    TrajectoryTooShort { len: usize, need: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("class {0:?} has no members")]
    EmptyClass(String),

    #[error("cannot draw a distinct {0} to corrupt a triple")]
    CatalogTooSmall(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn json(err: serde_json::Error) -> Self {
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// True for failures caused by bad input rather than arithmetic.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numerical(_) | Error::Io { .. })
    }
}
