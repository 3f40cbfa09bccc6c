//! Error type shared across the crate.
//!
//! Every fallible operation returns [`Result`]. Variants are grouped by the
//! kind of contract that was violated: bad input parameters, mismatched
//! geometry, degenerate statistics, or a document/file problem.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes reported by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scalar argument is outside its documented domain.
    #[error("invalid {name}: {reason}")]
    InvalidParameter {
        /// Name of the offending parameter.
        name: &'static str,
        /// Why the value was rejected.
        reason: String,
    },

    /// A density matrix failed validation (hermiticity, trace or positivity).
    #[error("invalid two-photon state: {0}")]
    InvalidState(String),

    /// Two objects that must share a pixel grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An object footprint or region extends outside the grid.
    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    /// A pixel region is malformed or too small for the requested statistic.
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    /// Frames passed to a comparison carry incompatible measurement bases.
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    /// Both regions have exactly zero sample variance, so no noise scale
    /// exists to normalize the contrast against.
    #[error("zero variance in both regions; signal-to-noise is undefined")]
    ZeroVariance,

    /// No pixel reached the minimum expected count for a chi-squared test.
    #[error("no pixel meets the expected-count threshold of {threshold} for the chi-squared test")]
    NoTestablePixels {
        /// Minimum expected count a pixel must reach to be included.
        threshold: f64,
    },

    /// The phases in the trim region cancel, leaving no preferred direction:
    /// the circular mean is undefined (antipodal distribution).
    #[error("phase trim is ambiguous: circular mean over the region has no preferred direction")]
    AmbiguousTrim,

    /// An authentication run recorded no coincidences in either basis, so no
    /// accept/reject decision can be made.
    #[error("authentication is indeterminate: no coincidences recorded")]
    IndeterminateAuth,

    /// No finite sample size can separate the two hypotheses.
    #[error("no finite sample size separates the hypotheses: {0}")]
    NoFiniteSampleSize(String),

    /// A scene document failed to parse or validate.
    #[error(transparent)]
    SceneDocument(#[from] SceneDocError),

    /// A portable graymap file is malformed.
    #[error("pgm {}: {reason}", path.display())]
    Pgm {
        /// File that failed to parse or validate.
        path: PathBuf,
        /// What was wrong with it.
        reason: String,
    },

    /// Underlying I/O failure.
    #[error("i/o on {}: {source}", path.display())]
    Io {
        /// File or directory involved.
        path: PathBuf,
        /// Operating-system error.
        source: std::io::Error,
    },
}

/// Failure modes specific to JSON scene documents.
#[derive(Debug, thiserror::Error)]
pub enum SceneDocError {
    /// The document is not valid JSON or contains an unknown key. The
    /// message carries serde's diagnostic, which names unknown fields.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        /// 1-based line of the failure.
        line: usize,
        /// 1-based column of the failure.
        column: usize,
        /// Underlying diagnostic text.
        message: String,
    },

    /// One or more required keys are absent. All missing keys are listed.
    #[error("missing required keys: {}", keys.join(", "))]
    MissingKeys {
        /// Dotted paths of every missing key.
        keys: Vec<String>,
    },

    /// The document parsed but a value is semantically invalid.
    #[error("invalid value for `{key}`: {reason}")]
    Semantic {
        /// Dotted path of the offending key.
        key: String,
        /// Why the value was rejected.
        reason: String,
    },
}

impl Error {
    /// Shorthand for [`Error::InvalidParameter`].
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Shorthand for [`Error::Io`].
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
