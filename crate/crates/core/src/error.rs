use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("missing column `{0}` in detection data header")]
    MissingColumn(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("measure `{0}` has a zero field value; relative error is undefined")]
    ZeroFieldValue(String),

    #[error("orthogonal array capacity exceeded: {0}")]
    Capacity(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("no subject vehicle in the post-warm-up log")]
    MissingSubject,

    #[error("scenario infeasible: {0}")]
    Infeasible(String),

    #[error("stage failed: {0}")]
    Stage(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
