use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FofrError>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum FofrError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient sample: need at least {min} curves, got {n}")]
    InsufficientSample { n: usize, min: usize },

    #[error("incompatible grids: {left} vs {right} points")]
    IncompatibleGrids { left: usize, right: usize },

    #[error("incompatible samples: {left} vs {right} subjects")]
    IncompatibleSamples { left: usize, right: usize },

    #[error("sample must be centered first (largest column sum {max_col_sum:e})")]
    MustCenterFirst { max_col_sum: f64 },

    #[error("grid too coarse: {size} points, need at least {min}")]
    GridTooCoarse { size: usize, min: usize },

    #[error("insufficient rank for block {block}: requested {requested} modes, only {achievable} achievable")]
    InsufficientRank {
        block: usize,
        requested: usize,
        achievable: usize,
    },

    #[error("insufficient eigenvalues for exponent regression: {usable} usable, need 3")]
    InsufficientEigenvalues { usable: usize },

    #[error("singular normal system in response block {block}")]
    SingularSystem { block: usize },

    #[error("GCV undefined at lambda={lambda:e}: tr(H)={trace} >= n={n}")]
    GcvUndefined { lambda: f64, trace: f64, n: usize },

    #[error("no lambda in the grid yields a defined GCV score")]
    NoValidLambda,

    #[error("bootstrap replicate {index} failed: {source}")]
    ReplicateFailed {
        index: usize,
        #[source]
        source: Box<FofrError>,
    },

    #[error("quantile unstable: Q={q} replicates, need at least {min} for this alpha")]
    QuantileUnstable { q: usize, min: usize },

    #[error("degenerate truncation: u_n={u_n}")]
    DegenerateTruncation { u_n: f64 },

    #[error("extremal masks are empty")]
    InvalidMasks,

    #[error("leave-one-out fit without subject {subject} failed: {source}")]
    FitFailed {
        subject: usize,
        #[source]
        source: Box<FofrError>,
    },

    #[error("malformed data in {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl FofrError {
    /// Failures caused by malformed or mismatched input data rather than numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            FofrError::Data { .. }
                | FofrError::Io { .. }
                | FofrError::Json(_)
                | FofrError::IncompatibleGrids { .. }
                | FofrError::IncompatibleSamples { .. }
                | FofrError::InsufficientSample { .. }
                | FofrError::MustCenterFirst { .. }
        )
    }

    pub fn is_usage_error(&self) -> bool {
        matches!(
            self,
            FofrError::InvalidArgument(_) | FofrError::QuantileUnstable { .. }
        )
    }
}
