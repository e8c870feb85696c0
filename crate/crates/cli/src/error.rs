use thiserror::Error;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or bad input files.
    #[error("{0}")]
    Usage(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A failure that no input should be able to cause.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for usage and input errors, 1 for internal ones.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Io { .. } => 2,
            Self::Internal(_) => 1,
        }
    }
}

impl From<dsag_core::Error> for CliError {
    fn from(e: dsag_core::Error) -> Self {
        use dsag_core::Error as E;
        match e {
            E::Domain(_) | E::Config(_) => Self::Usage(e.to_string()),
            E::NoGradient | E::RankDeficient { .. } | E::Oracle(_) => Self::Internal(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
