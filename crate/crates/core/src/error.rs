use thiserror::Error;

/// Errors raised by the solvers, the linear algebra layer and the IO helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A - A^H| = {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is ill-conditioned (condition estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("QoS matrix is singular: the precoder cannot meet the SINR target at any power")]
    SingularDelta,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("convex program has no strictly feasible point")]
    InfeasibleProgram,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("jammer-to-eavesdropper channel is rank deficient")]
    RankDeficientG,
    #[error("alternating step increased the objective from {prev:.9e} to {next:.9e}")]
    NonMonotone { prev: f64, next: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
