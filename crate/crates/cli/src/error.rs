use catlab::dynamics::DynamicsError;
use catlab::fup::FupError;
use catlab::phase_space::PhaseSpaceError;
use catlab::propagator::PropagatorError;
use catlab::quantization::QuantizationError;
use catlab::spectral::SpectralError;
use serde::Serialize;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Usage { code: &'static str, message: String },
    #[error("{message}")]
    Domain { code: &'static str, message: String },
    #[error("{message}")]
    Numerical { code: &'static str, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn usage(code: &'static str, message: impl Into<String>) -> Self {
        CliError::Usage { code, message: message.into() }
    }

    pub fn domain(code: &'static str, message: impl Into<String>) -> Self {
        CliError::Domain { code, message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage { code, .. } | CliError::Domain { code, .. } | CliError::Numerical { code, .. } => code,
            CliError::Io { .. } => "IO_ERROR",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 1,
            CliError::Domain { .. } | CliError::Io { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            code: &'a str,
            message: String,
            exit_code: i32,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        let env = Envelope { error: Body { code: self.code(), message: self.to_string(), exit_code: self.exit_code() } };
        serde_json::to_string(&env).expect("error envelope serializes")
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::domain(e.code(), e.to_string())
    }
}

impl From<QuantizationError> for CliError {
    fn from(e: QuantizationError) -> Self {
        CliError::domain(e.code(), e.to_string())
    }
}

impl From<PhaseSpaceError> for CliError {
    fn from(e: PhaseSpaceError) -> Self {
        CliError::domain(e.code(), e.to_string())
    }
}

impl From<FupError> for CliError {
    fn from(e: FupError) -> Self {
        CliError::domain(e.code(), e.to_string())
    }
}

impl From<PropagatorError> for CliError {
    fn from(e: PropagatorError) -> Self {
        match e {
            PropagatorError::NotFound(_) => CliError::Numerical { code: e.code(), message: e.to_string() },
            _ => CliError::domain(e.code(), e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        if e.is_numerical() {
            CliError::Numerical { code: e.code(), message: e.to_string() }
        } else {
            CliError::domain(e.code(), e.to_string())
        }
    }
}
