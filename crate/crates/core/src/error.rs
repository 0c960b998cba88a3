use thiserror::Error;

use crate::flow::FlowState;
use crate::polytope::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point ({}, {}) is not in the open polytope", .0[0], .0[1])]
    Domain(Point),

    #[error("curvature undefined at ({}, {}): {reason}", .at[0], .at[1])]
    CurvatureUndefined { at: Point, reason: String },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("derivative order {0} is not supported (maximum is 4)")]
    UnsupportedOrder(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("step rejected {rejections} times in a row at t = {t}; last good state kept")]
    Stiff {
        rejections: usize,
        t: f64,
        last_good: Box<FlowState>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Stiff { .. } | Error::CurvatureUndefined { .. } | Error::NoConvergence { .. }
        )
    }
}
