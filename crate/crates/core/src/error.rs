use thiserror::Error;

/// Errors raised by the theory and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("evaluation point {lambda} lies inside the Marchenko-Pastur support [{lower}, {upper}]")]
    Support { lambda: f64, lower: f64, upper: f64 },

    #[error("spike {a} is not usable for aspect ratio {y}: {reason}")]
    Phase { a: f64, y: f64, reason: String },

    #[error("spikes {a_i} and {a_j} are too close for the cross formula (|a_i - a_j| < 1e-9)")]
    DegenerateSpikes { a_i: f64, a_j: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not Hermitian: max asymmetry {max_asymmetry:e}")]
    Symmetry { max_asymmetry: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("{what} did not converge after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
