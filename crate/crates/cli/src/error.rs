use std::fmt;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const VIOLATION: i32 = 4;
    pub const DIVERGENCE: i32 = 5;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(exit::USAGE, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(exit::VALIDATION, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(exit::OTHER, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<nsdde::Error> for CliError {
    fn from(e: nsdde::Error) -> Self {
        use nsdde::Error as E;
        let code = match &e {
            E::UnknownName { .. } => exit::USAGE,
            E::NonFiniteStep { .. } | E::ReferenceDiverged { .. } | E::AdmissibleDivergence { .. } => exit::DIVERGENCE,
            E::InvalidArgument(_)
            | E::Domain { .. }
            | E::Bracket { .. }
            | E::Divisibility { .. }
            | E::IndexOutOfRange { .. }
            | E::MissingGrowthDeclaration(_)
            | E::InsufficientPoints(_)
            | E::Config(_) => exit::VALIDATION,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}
