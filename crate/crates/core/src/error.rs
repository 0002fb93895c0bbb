use std::path::PathBuf;

use thiserror::Error;

use crate::covariance::CovarianceParams;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter outside its domain: {0}")]
    ParameterDomain(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// `pivot` is the 1-based position of the first non-positive pivot.
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("every simulated exceedance set was empty")]
    EmptyExceedanceDistribution,

    #[error("no grid pixel survives the mask")]
    EmptyGrid,

    #[error("degenerate rectangle: {0}")]
    DegenerateRectangle(String),

    #[error("polygon is self-intersecting (edges {0} and {1})")]
    SelfIntersectingPolygon(usize, usize),

    #[error("points do not span a two-dimensional hull")]
    DegenerateHull,

    #[error("optimizer did not converge after {evals} evaluations")]
    NonConvergence {
        evals: usize,
        best: Box<CovarianceParams>,
        best_value: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error at row {row}, column '{column}': {message}")]
    DataCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("experiment invalid: {failed} of {total} replicates failed")]
    ExperimentInvalid { failed: usize, total: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ParameterDomain(_) => 2,
            Error::DataCell { .. } | Error::Data(_) | Error::NonFinite(_) | Error::Io { .. } => 3,
            Error::NonConvergence { .. } => 5,
            _ => 4,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ParameterDomain(_) => "parameter_domain",
            Error::NonFinite(_) => "non_finite",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::EmptyExceedanceDistribution => "empty_exceedance_distribution",
            Error::EmptyGrid => "empty_grid",
            Error::DegenerateRectangle(_) => "degenerate_rectangle",
            Error::SelfIntersectingPolygon(..) => "self_intersecting_polygon",
            Error::DegenerateHull => "degenerate_hull",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Config(_) => "config",
            Error::DataCell { .. } | Error::Data(_) => "data",
            Error::ExperimentInvalid { .. } => "experiment_invalid",
            Error::Io { .. } => "io",
        }
    }
}
