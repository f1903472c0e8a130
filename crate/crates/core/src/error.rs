use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input: wrong dimensions, non-normalized states, bad ranges.
    #[error("validation error: {0}")]
    Validation(String),

    /// The party count is outside what the operation supports.
    #[error("scenario error: {0}")]
    Scenario(String),

    /// A measurement pair with |alpha| or |beta| equal to 0 or 1 (commuting U and D).
    #[error("degenerate measurement: {0}")]
    DegenerateMeasurement(String),

    /// An object would be too large to build densely.
    #[error("size error: {0}")]
    Size(String),

    /// A numerical routine failed (loss of orthogonality, cycling guard, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The requested relaxation level cannot express a needed moment.
    #[error("capability error: {0}")]
    Capability(String),

    /// The semidefinite solver hit its iteration cap before reaching tolerance.
    #[error(
        "solver did not converge after {iterations} iterations \
         (psd residual {psd_residual:.3e}, affine residual {affine_residual:.3e})"
    )]
    NotConverged {
        iterations: usize,
        psd_residual: f64,
        affine_residual: f64,
    },

    /// A linear program had no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A linear program was unbounded in the objective direction.
    #[error("unbounded: {0}")]
    Unbounded(String),

    /// The hypothesis of the self-testing theorem does not hold for the input.
    #[error("theorem hypothesis unmet: {0}")]
    HypothesisUnmet(String),
}

pub type Result<T> = std::result::Result<T, Error>;
