use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("SMF parse error at byte {offset}: {message}")]
    Smf { offset: usize, message: String },

    #[error("unrecognized event code {token:?} at index {index}")]
    EventCode { index: usize, token: String },

    #[error("tokenizer training failed: {0}")]
    Train(String),

    #[error("vocabulary size {requested} unreachable; at most {achievable} entries are available")]
    VocabUnreachable { requested: usize, achievable: usize },

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenId { id: u32, size: usize },

    #[error("vocabulary file line {line}: {message}")]
    VocabFormat { line: usize, message: String },

    #[error("category file line {line}: {message}")]
    CategoryFormat { line: usize, message: String },

    #[error("minimal-pair file line {line}: {message}")]
    PairsFormat { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("pack error: {0}")]
    Pack(String),

    #[error("manifest format error: {0}")]
    ManifestFormat(String),

    #[error("scoring error: {0}")]
    Score(String),

    #[error("logit provider error: {0}")]
    Provider(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("pipeline step `{step}` failed: {source}")]
    Step {
        step: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
