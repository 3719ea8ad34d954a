use std::fmt;

/// Failure of a subcommand, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation, invalid config or a missing input path.
    Usage(String),
    /// Inputs that are present but unusable.
    Data(String),
    /// An iterative method failed to converge.
    Numerical(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<tasknet::Error> for CliError {
    fn from(e: tasknet::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Attaches a path to an I/O or library error.
pub trait Context<T> {
    fn at(self, what: &std::path::Path) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for Result<T, E> {
    fn at(self, what: &std::path::Path) -> CliResult<T> {
        self.map_err(|e| match e.into() {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", what.display())),
            CliError::Data(m) => CliError::Data(format!("{}: {m}", what.display())),
            CliError::Numerical(m) => CliError::Numerical(format!("{}: {m}", what.display())),
        })
    }
}
