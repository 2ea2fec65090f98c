use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix field does not have the shape implied by (k, j).
    #[error("shape mismatch in `{field}`: expected {expected}, found {found}")]
    Shape {
        field: &'static str,
        expected: String,
        found: String,
    },

    /// A matrix that must be invertible is singular (or numerically so).
    #[error("singular matrix in {context}: smallest singular value {sigma_min:.3e} (largest {sigma_max:.3e})")]
    Singular {
        context: &'static str,
        sigma_min: f64,
        sigma_max: f64,
    },

    /// A rank determination fell inside the indeterminate gap band.
    #[error("indeterminate rank in {context}: singular-value gap {gap:.3e} below the decision band")]
    IndeterminateRank { context: &'static str, gap: f64 },

    /// Matrix logarithm could not be completed on any branch.
    #[error("matrix logarithm failed: {0}")]
    LogBranch(String),

    /// An iterative procedure failed to converge.
    #[error("{what} did not converge within {steps} steps (last measure {last:.3e})")]
    NoConvergence {
        what: &'static str,
        steps: usize,
        last: f64,
    },

    /// The random generator exhausted its retry budget.
    #[error("generator exhausted {attempts} attempts without producing generic data (k={k}, j={j})")]
    GeneratorExhausted { k: usize, j: usize, attempts: usize },

    /// An operation was invoked on data that does not satisfy its precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The gradient flow ran out of steps or of step size; the energy
    /// history so far is attached.
    #[error("the flow stalled after {steps} steps (residual {last:.3e})")]
    FlowStalled {
        steps: usize,
        last: f64,
        trace: Vec<f64>,
    },

    /// Lattice window too small: the result changed when the window grew.
    #[error("window instability: dims {at_window:?} at window {window} but {at_next:?} at window {next}; increase the window")]
    WindowUnstable {
        window: usize,
        next: usize,
        at_window: (usize, usize, usize),
        at_next: (usize, usize, usize),
    },

    /// Serialization or file-format problem.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON encoding/decoding failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
