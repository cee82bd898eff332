use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hurwitz (spectral abscissa {0})")]
    NotHurwitz(f64),
    #[error("linear solver failure: {0}")]
    Solver(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("fixture data: {0}")]
    Fixture(String),
}

pub type Result<T> = std::result::Result<T, Error>;
