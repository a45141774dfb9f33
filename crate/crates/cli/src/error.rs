use spdelab::LabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0} acceptance gate(s) failed")]
    GateFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::GateFailed(_) => 1,
        }
    }

    pub fn parse(e: LabError) -> Self {
        CliError::Parse(e.to_string())
    }

    pub fn precondition(e: LabError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Domain(_)
            | LabError::Input(_)
            | LabError::Singularity(_)
            | LabError::Construction(_)
            | LabError::Extrapolation(_)
            | LabError::Resolution(_)
            | LabError::Io(_) => CliError::Precondition(e.to_string()),
            LabError::BlowUp { .. } | LabError::Spectral(_) | LabError::InsufficientData(_) | LabError::Oracle(_) => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Precondition(format!("io: {e}"))
    }
}
