use polybound::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema: {0}")]
    Schema(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error(transparent)]
    Analysis(#[from] polybound::Error),
}

impl CliError {
    pub fn schema(msg: impl Into<String>) -> Self {
        CliError::Schema(msg.into())
    }

    /// 2 for malformed input, 3 for infeasible or inconsistent data, 4 for solver failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) | CliError::Io(_) => 2,
            CliError::Analysis(e) => match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Infeasible => 3,
                ErrorClass::Solver => 4,
            },
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Schema(_) => "schema",
            CliError::Io(_) => "io",
            CliError::Analysis(e) => e.code(),
        }
    }

    pub fn class(&self) -> &'static str {
        match self.exit_code() {
            2 => "input",
            3 => "infeasible",
            _ => "solver",
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
