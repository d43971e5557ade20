use std::fmt;

/// Exit 1 for bad input or configuration, 2 for failures during computation.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<laborflow::Error> for CliError {
    fn from(e: laborflow::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

pub fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}
