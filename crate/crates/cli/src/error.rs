use junction_core::JunctionError;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const SCHEMA: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
    pub const BUDGET: u8 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Schema,
    Infeasible,
    Other,
}

/// An error raised by the front-end itself, carrying its exit code.
#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn schema(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Schema, message: message.into() }
    }

    pub fn other(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Other, message: message.into() }
    }

    pub fn code(&self) -> u8 {
        match self.kind {
            Kind::Schema => exit::SCHEMA,
            Kind::Infeasible => exit::INFEASIBLE,
            Kind::Other => exit::OTHER,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            Kind::Schema => write!(f, "schema error: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

/// Exit code for an error anywhere in the chain.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return e.code();
        }
        if let Some(e) = cause.downcast_ref::<JunctionError>() {
            return match e {
                JunctionError::NotConverged { .. } => exit::NOT_CONVERGED,
                JunctionError::Infeasible { .. } | JunctionError::AllLawsInfeasible => exit::INFEASIBLE,
                JunctionError::BudgetExceeded { .. } => exit::BUDGET,
                _ => exit::OTHER,
            };
        }
    }
    exit::OTHER
}
