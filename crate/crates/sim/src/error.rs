use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] dsfl_core::Error),
    #[error(transparent)]
    Learn(#[from] dsfl_learn::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}

/// Process exit codes by error category.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INTERNAL: u8 = 1;
    /// Bad configuration or arguments (also used by the argument parser).
    pub const CONFIG: u8 = 2;
    /// Missing or malformed input files, unwritable output.
    pub const DATA: u8 = 3;
    /// The allocation problem has no feasible solution.
    pub const INFEASIBLE: u8 = 4;
}

impl Error {
    pub fn exit_code(&self) -> u8 {
        use dsfl_core::Error as C;
        use dsfl_learn::Error as L;
        match self {
            Error::Config { .. } | Error::Parse { .. } => exit::CONFIG,
            Error::Io { .. } | Error::Csv(_) => exit::DATA,
            Error::Core(C::Infeasible { .. }) => exit::INFEASIBLE,
            Error::Core(C::InvalidConfig { .. } | C::InvalidArgument(_) | C::TooLarge(_)) => exit::CONFIG,
            Error::Core(_) => exit::INTERNAL,
            Error::Learn(L::Io { .. } | L::Format { .. } | L::Csv(_)) => exit::DATA,
            Error::Learn(L::InvalidConfig { .. } | L::InvalidArgument(_)) => exit::CONFIG,
            Error::Learn(L::Shape(_)) => exit::INTERNAL,
        }
    }
}
