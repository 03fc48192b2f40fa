//! Error-to-exit-code mapping: 0 success, 1 degraded (warnings),
//! 2 config/input error, 3 credential error.

use thiserror::Error;
use valign_core::catalog::CatalogError;
use valign_core::context::ContextError;
use valign_core::gateway::GatewayError;
use valign_core::ingest::IngestError;
use valign_core::metrics::MetricsError;
use valign_core::prompt::PromptError;
use valign_core::report::ReportError;

pub const EXIT_DEGRADED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CREDENTIAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Credential(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Credential(_) => EXIT_CREDENTIAL,
        }
    }
}

/// How a successful command run ends: clean, or completed with a
/// degraded-quality warning.
#[derive(Debug)]
pub enum CmdOutcome {
    Clean,
    Degraded(String),
}

pub type CmdResult = Result<CmdOutcome, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<ContextError> for CliError {
    fn from(e: ContextError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> CliError {
        match e {
            GatewayError::MissingCredential(_) | GatewayError::Auth(_) => {
                CliError::Credential(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}
