use thiserror::Error;

/// Errors produced by the analytic and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("net profit condition violated: E S_N = {mean_claims}, κN = {premium}")]
    NetProfitViolated { mean_claims: f64, premium: f64 },

    #[error("expected {expected} characteristic roots counted with multiplicity, found {found}")]
    RootCountMismatch { expected: usize, found: usize },

    #[error("boundary system is singular (condition number {condition:e}, |det| {determinant:e})")]
    SingularSystem { condition: f64, determinant: f64 },

    #[error("boundary system is not square after reduction: {rows} rows, {cols} columns")]
    DimensionMismatch { rows: usize, cols: usize },

    #[error("boundary solution has imaginary residue {max_imag:e}")]
    ImaginaryResidue { max_imag: f64 },

    #[error("mass m_{index}^({season}) = {value:e} is negative beyond roundoff")]
    NegativeMass { season: usize, index: usize, value: f64 },

    #[error("season {season} has no usable divisor in the mass recurrence")]
    ZeroDivisor { season: usize },

    #[error("s = {re}{im:+}i is within pole tolerance of a characteristic root")]
    PoleProximity { re: f64, im: f64 },

    #[error("malformed model file: {0}")]
    Parse(String),

    #[error("{path}: {message}")]
    Validation { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
