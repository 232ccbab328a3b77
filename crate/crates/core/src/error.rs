use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("state error: {0}")]
    State(String),

    #[error("exhaustive search bound exceeded: {0}")]
    Bound(String),

    /// A network, dataset or calibration file failed validation. `layer` is
    /// the offending layer index when the problem is local to one layer.
    #[error("load error{}: {msg}", layer.map(|l| format!(" (layer {l})")).unwrap_or_default())]
    Load { layer: Option<usize>, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn load(layer: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Load {
            layer,
            msg: msg.into(),
        }
    }
}
