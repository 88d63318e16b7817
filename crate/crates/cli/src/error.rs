use std::fmt;
use std::path::Path;

/// Exit code 1 usage, 2 input, 3 pipeline.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    /// `name` is the short error name printed first on stderr.
    Pipeline { name: String, message: String },
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Input(_) => 2,
            Self::Pipeline { .. } => 3,
        }
    }

    pub fn input(path: &Path, e: impl fmt::Display) -> Self {
        Self::Input(format!("{}: {e}", path.display()))
    }

    pub fn pipeline(name: &str, e: impl fmt::Display) -> Self {
        Self::Pipeline {
            name: name.to_string(),
            message: e.to_string(),
        }
    }

    pub fn write(path: &Path, e: impl fmt::Display) -> Self {
        Self::Input(format!("cannot write {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Input(m) => write!(f, "input error: {m}"),
            Self::Pipeline { name, message } if message.starts_with(name.as_str()) => f.write_str(message),
            Self::Pipeline { name, message } => write!(f, "{name}: {message}"),
        }
    }
}
