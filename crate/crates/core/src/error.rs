use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    /// A lightness target that no gamma in the search interval can reach.
    #[error("infeasible lightness target {target}: reachable range is [{lo:.6}, {hi:.6}]")]
    Infeasible { target: f64, lo: f64, hi: f64 },

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

    #[error("malformed PMAP: {0}")]
    Pmap(String),

    /// The external reconstructor misbehaved. `diagnostics` carries whatever
    /// the child printed.
    #[error("external reconstructor failed: {message}\n{diagnostics}")]
    Adapter { message: String, diagnostics: String },

    /// An upstream stage's output is missing.
    #[error("missing upstream artifact: {0}")]
    Dependency(String),

    #[error("silhouette undefined: {0}")]
    UndefinedScore(String),

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{0}")]
    Pipeline(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
