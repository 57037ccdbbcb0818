use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("requested {requested} streams but the channel has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("exhaustive search over {count} subsets exceeds the cap of {cap}; reduce ns or the number of rays")]
    SearchTooLarge { count: u128, cap: u128 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numerical failures and everything else at runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Unknown { .. }
            | Error::InvalidArgument(_)
            | Error::InvalidGeometry(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
