use thiserror::Error;

/// Errors raised by the ranking pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A least-squares update had no usable observations for one column or row.
    #[error("degenerate {axis} {index} at iteration {iteration}")]
    Degenerate {
        axis: &'static str,
        index: usize,
        iteration: usize,
    },

    /// An iterative solver failed part way through.
    #[error("solver failed at iteration {iteration}: {reason}")]
    Solver { iteration: usize, reason: String },

    /// The comparison graph splits into several components.
    #[error("comparison graph is disconnected into {} components: {components:?}", components.len())]
    Disconnected { components: Vec<Vec<usize>> },
}

impl RankError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        RankError::Domain(msg.into())
    }

    /// True for errors produced inside an iterative solve, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, RankError::Degenerate { .. } | RankError::Solver { .. })
    }
}

pub type Result<T> = std::result::Result<T, RankError>;
