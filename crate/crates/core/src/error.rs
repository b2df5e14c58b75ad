use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("displacement too large: |eta|_inf = {max_abs} >= tubular width {width}")]
    DisplacementTooLarge { max_abs: f64, width: f64 },

    #[error("inverse map did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("matrix is not antisymmetric (|W + W^T| = {defect})")]
    NotAntisymmetric { defect: f64 },

    #[error("exponent p = {0} must satisfy p >= 1")]
    BadExponent(f64),

    #[error("CFL violation: courant number {courant} exceeds {limit}")]
    CflViolation { courant: f64, limit: f64 },

    #[error("pressure projection diverged: relative residual {residual} after {iterations} iterations")]
    ProjectionDiverged { residual: f64, iterations: usize },

    #[error("diffusion solve diverged: relative residual {residual} after {iterations} iterations")]
    DiffusionSolveDiverged { residual: f64, iterations: usize },

    #[error("linear solve diverged: relative residual {residual} after {iterations} iterations")]
    SolveDiverged { residual: f64, iterations: usize },

    #[error("wall contact: |eta|_inf = {max_abs} reached {limit}")]
    WallContact { max_abs: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation(_) | Error::GridMismatch(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
