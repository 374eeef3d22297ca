use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A subsystem index or subsystem list does not fit the operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// Probability mass leaks past the Fock cutoff.
    #[error(
        "truncation error: {context}: tail mass {tail_mass:.3e} exceeds tolerance {tolerance:.3e} at n_max = {n_max}{}",
        required_n_max.map(|n| format!(" (requires n_max >= {n})")).unwrap_or_default()
    )]
    Truncation {
        context: String,
        tail_mass: f64,
        tolerance: f64,
        n_max: usize,
        required_n_max: Option<usize>,
    },

    /// The joint Hilbert space would be too large to hold.
    #[error("capacity error: joint dimension exceeds {limit}")]
    Capacity { limit: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// The requested measurement outcome has (numerically) zero probability.
    #[error("post-selection impossible: {what} has probability {probability:.3e}")]
    PostSelectionImpossible { what: String, probability: f64 },

    /// A numerical consistency check did not hold.
    #[error("check failed: {0}")]
    CheckFailed(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
