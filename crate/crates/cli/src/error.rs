use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or unreadable configuration; the message names the key.
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure in {module} ({context}): {source}")]
    Numerical {
        module: &'static str,
        context: String,
        source: chi2atom::Error,
    },

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn config(key: &str, reason: impl std::fmt::Display) -> Self {
        CliError::Config(format!("`{key}`: {reason}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical { .. } => 2,
            CliError::Output(_) => 3,
        }
    }

    /// Sort a simulator error into config or numerical failure.
    pub fn from_core(module: &'static str, context: impl Into<String>, e: chi2atom::Error) -> Self {
        match e {
            chi2atom::Error::Io(io) => CliError::Output(io.to_string()),
            e if e.is_numerical() => CliError::Numerical {
                module,
                context: context.into(),
                source: e,
            },
            e => CliError::Config(format!("{module}: {e}")),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
