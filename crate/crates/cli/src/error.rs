use hardy_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    /// Unreadable or malformed input.
    #[error("invalid input: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(String),
    /// Some scan rows failed or broke an invariant; the CSV was still written.
    #[error("scan finished with {0} failed row(s)")]
    ScanFailed(usize),
    /// The self-test ran but the fidelity fell short of the threshold.
    #[error("not certified: total fidelity {0:.9}")]
    NotCertified(f64),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// 0 ok, 1 not certified, 2 bad input, 3 solver failure, 4 theorem hypothesis unmet.
pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Input(_) | CliError::Io(_) => 2,
        CliError::ScanFailed(_) => 3,
        CliError::NotCertified(_) => 1,
        CliError::Core(core) => match core {
            Error::Validation(_)
            | Error::Scenario(_)
            | Error::DegenerateMeasurement(_)
            | Error::Size(_)
            | Error::Capability(_) => 2,
            Error::NotConverged { .. } | Error::Numeric(_) | Error::Infeasible(_) | Error::Unbounded(_) => 3,
            Error::HypothesisUnmet(_) => 4,
        },
    }
}
