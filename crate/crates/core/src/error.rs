use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LleError>;

#[derive(Debug, Error)]
pub enum LleError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}: line {line}: expected {expected} columns, found {found}")]
    RaggedRow {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: line {line}, column {column}: cannot parse {text:?} as a number")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        text: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(
        "neighborhood Gram matrix is singular (reciprocal condition {rcond:.3e}); \
         use a positive regularization constant or the low-dimensional representation method"
    )]
    SingularNeighborhood { rcond: f64 },

    #[error("weights sum to zero after the solve; normalization is undefined")]
    DegenerateWeights,

    #[error(
        "projected neighborhood is not in general position (alpha = {alpha:.6}, \
         1'U2U2'1 = {mass:.3e})"
    )]
    GeneralPosition { alpha: f64, mass: f64 },

    #[error("neighbor graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("correlation is undefined for constant input")]
    UndefinedCorrelation,

    #[error("point {index}: {source}")]
    AtPoint {
        index: usize,
        #[source]
        source: Box<LleError>,
    },
}

impl LleError {
    pub(crate) fn at_point(self, index: usize) -> Self {
        LleError::AtPoint {
            index,
            source: Box::new(self),
        }
    }

    /// The innermost error, with any point annotation removed.
    pub fn root(&self) -> &LleError {
        match self {
            LleError::AtPoint { source, .. } => source.root(),
            other => other,
        }
    }

    /// Index of the offending point, when the error came from a single neighborhood.
    pub fn point_index(&self) -> Option<usize> {
        match self {
            LleError::AtPoint { index, .. } => Some(*index),
            _ => None,
        }
    }
}
