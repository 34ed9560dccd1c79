use thiserror::Error;

/// Errors produced by the junction library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum JunctionError {
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid junction shape: need at least 2 planes, got {0}")]
    InvalidShape(usize),
    #[error("plane {0} has an empty control set")]
    EmptyControlSet(usize),
    #[error("unknown control atom `{0}`")]
    UnknownAtom(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Hamiltonian of plane {0} is not coercive in the normal direction")]
    NotCoercive(usize),
    #[error("plane {0} has no zero-normal (tangential) control at this point")]
    EmptyTangentialSet(usize),
    #[error("covectors disagree on the tangential component p0")]
    MismatchedTangential,
    #[error("point outside the grid domain: {0}")]
    OutOfDomain(String),
    #[error("value iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("no admissible control at {0}")]
    EmptyAdmissibleSet(String),
    #[error("law budget exceeded: {needed} laws > budget {budget}")]
    BudgetExceeded { needed: f64, budget: u64 },
    #[error("every enumerated control law is infeasible")]
    AllLawsInfeasible,
    #[error("trajectory is infeasible at t = {t}")]
    Infeasible { t: f64 },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, JunctionError>;

impl From<std::io::Error> for JunctionError {
    fn from(e: std::io::Error) -> Self {
        JunctionError::Io(e.to_string())
    }
}

impl From<csv::Error> for JunctionError {
    fn from(e: csv::Error) -> Self {
        JunctionError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for JunctionError {
    fn from(e: serde_json::Error) -> Self {
        JunctionError::Io(e.to_string())
    }
}
