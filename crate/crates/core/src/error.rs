use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("job {job} is not eligible on machine {machine}")]
    Ineligible { machine: usize, job: usize },

    #[error("job {job} is not assigned to any machine")]
    Unassigned { job: usize },

    #[error("{jobs} jobs exceed the configuration enumeration cap of {cap}; use a smaller instance")]
    TooManyJobs { jobs: usize, cap: usize },

    #[error("simplex did not converge within {0} iterations")]
    IterationLimit(usize),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("fractional assignment is invalid: {0}")]
    InvalidFractional(String),

    #[error("sizes depend on the machine for job {0}; rounding needs machine-independent sizes")]
    MachineDependentSizes(usize),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("certificate: {0}")]
    Certificate(String),

    #[error("parameter search: {0}")]
    Search(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
