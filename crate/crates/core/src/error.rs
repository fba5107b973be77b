use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge on element {element} (alpha = {alpha})")]
    Quadrature { element: usize, alpha: f64 },

    #[error("singular matrix: zero pivot at row {pivot}")]
    Singular { pivot: usize },

    #[error("resolvent solve broke down at lambda = {lambda}")]
    SolverBreakdown { lambda: f64 },

    #[error("non-finite state at step {step}")]
    Blowup { step: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("energy underflow: {0}")]
    EnergyUnderflow(String),

    #[error("alpha = {0} outside the open interval (0,5)")]
    AlphaDomain(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
