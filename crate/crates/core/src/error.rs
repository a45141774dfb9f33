use thiserror::Error;

/// Errors raised by the numerical routines of the lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("kernel is singular at the origin: {0}")]
    Singularity(String),
    #[error("spectral error: {0}")]
    Spectral(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical blow-up at step {step}: {detail}")]
    BlowUp { step: usize, detail: String },
    #[error("extrapolation outside table range: {0}")]
    Extrapolation(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Domain(msg.into()))
}
