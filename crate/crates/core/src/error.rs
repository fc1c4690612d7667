use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs (parameters, configuration, observed data) violate an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A row of a counts file could not be accepted.
    #[error("counts file line {line}: {message}")]
    CountsRow { line: usize, message: String },

    /// The estimation LP has no feasible point. `conflicting` names an
    /// irreducible subset of constraints that cannot hold together.
    #[error("infeasible {problem}: conflicting constraints [{}]", conflicting.join("; "))]
    Infeasible {
        problem: String,
        conflicting: Vec<String>,
    },

    /// The simplex routine hit a state it should never reach.
    #[error("LP solver defect: {0}")]
    SolverDefect(String),

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Validation(_)
            | Error::CountsRow { .. }
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::Infeasible { .. } => 3,
            Error::SolverDefect(_) | Error::Io(_) => 1,
        }
    }
}

/// Failure to open an input file is bad input rather than an I/O fault.
pub(crate) fn unreadable(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Validation(format!("cannot read {}: {e}", path.display()))
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}
