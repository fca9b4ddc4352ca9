use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("deformation gradient inverted (det = {det:e}) at particle {particle}")]
    Inversion { particle: usize, det: f64 },

    #[error("particle {particle} left the grid interior")]
    OutOfDomain { particle: usize },

    #[error("simulation blew up at step {step}: {reason}")]
    BlowUp { step: usize, reason: String },

    #[error("no equilibrium after {steps} steps (residual speed {residual:e} m/s)")]
    NonConvergence { steps: usize, residual: f64 },

    #[error("centerline bin {bin} holds no particles")]
    Resolution { bin: usize },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
