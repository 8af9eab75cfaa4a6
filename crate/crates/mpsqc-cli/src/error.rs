use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad config or inputs; exit code 2.
    Validation(String),
    /// Non-convergence, zero probability and other numerical failures; exit code 3.
    Numerical(String),
    /// Artifacts could not be written; exit code 1.
    Output(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Output(_) => 1,
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{what}: {m}")),
            CliError::Output(m) => CliError::Output(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Output(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<mpsqc::Error> for CliError {
    fn from(e: mpsqc::Error) -> Self {
        use mpsqc::Error as E;
        match e {
            E::InvalidInput(_) | E::DimensionMismatch(_) | E::NotPowerOfTwo { .. } | E::SizeGuard(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
