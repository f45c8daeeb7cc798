use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} outside its domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("bracketing failed after {iterations} iterations: {detail}")]
    Bracket { iterations: usize, detail: String },

    #[error("factor {factor} must divide both {total} steps and {per_delay} steps per delay")]
    Divisibility {
        factor: usize,
        total: usize,
        per_delay: usize,
    },

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("non-finite state produced at step {step}")]
    NonFiniteStep { step: usize },

    #[error("problem `{0}` declares no growth bound for g (r, K̄)")]
    MissingGrowthDeclaration(String),

    #[error("order fit needs at least 3 positive-error points, got {0}")]
    InsufficientPoints(usize),

    #[error("reference path {path} diverged at step {step}")]
    ReferenceDiverged { path: usize, step: usize },

    #[error("MTEM path {path} diverged at admissible step size {delta} (step {step})")]
    AdmissibleDivergence { path: usize, delta: f64, step: usize },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
