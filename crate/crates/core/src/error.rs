use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("invalid bath: {0}")]
    InvalidBath(String),

    #[error("hierarchy needs {required} ADOs, budget is {budget}")]
    CapacityExceeded { required: u128, budget: usize },

    #[error("dimension mismatch: expansion has {expansion} modes, hierarchy has {hierarchy}")]
    DimensionMismatch { expansion: usize, hierarchy: usize },

    #[error("propagation diverged at t = {t_fs:.4} fs (ADO max norm {norm:.3e})")]
    Diverged { t_fs: f64, norm: f64 },

    #[error("probe states are linearly dependent (|det| = {det:.3e})")]
    SingularProbeSet { det: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("config validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation(_) | Error::InvalidInput(_) => 2,
            Error::InvalidBath(_) | Error::CapacityExceeded { .. } => 2,
            _ => 3,
        }
    }
}
