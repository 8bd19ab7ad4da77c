use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("fusion error: {0}")]
    Fusion(String),
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("feature error: {0}")]
    Feature(String),
    #[error("pooling error: {0}")]
    Pooling(String),
    #[error("embed error: {0}")]
    Embed(String),
    #[error("loss error: {0}")]
    Loss(String),
    /// The loss is evaluated at (or within tolerance of) a hinge kink.
    #[error("non-differentiable point: {0}")]
    NonDifferentiable(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("container error at byte {offset}: {msg}")]
    Container { offset: u64, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("report error: {0}")]
    Report(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Image {
                source: image::ImageError::IoError(_),
                ..
            } => 2,
            _ => 1,
        }
    }
}
