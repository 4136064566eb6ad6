use std::fmt;

use tgp::TgpError;

/// Failures mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, arguments or input data; exit code 2.
    Input(String),
    /// Divergence or an ill-conditioned solve; exit code 1.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<TgpError> for CliError {
    fn from(e: TgpError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
