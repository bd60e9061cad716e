use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin value: {0}")]
    InvalidSpin(String),

    #[error("magnetic index 2m = {twice_m} is not valid for 2s = {twice_s}")]
    InvalidIndex { twice_s: u32, twice_m: i32 },

    #[error("direction is not a unit vector (|n| = {0})")]
    NonUnitDirection(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid POVM element: {0}")]
    InvalidEffect(String),

    #[error("invalid discretization grid: {0}")]
    InvalidGrid(String),

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
