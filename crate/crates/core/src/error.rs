use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Two distributions (or a distribution and a vector) do not share a grid or atom set.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument is outside the set where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A path whose endpoints coincide, so that it has no direction.
    #[error("degenerate path: {0}")]
    DegeneratePath(String),

    #[error("bandwidth error: {0}")]
    Bandwidth(String),

    /// Too much mass sits where the reference density is floored.
    #[error("support error: {0}")]
    Support(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Bad run configuration; `line` is 0 when no single line is to blame.
    #[error("config error{}: {message}", at_line(*.line))]
    Config { line: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors that come from reading user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Parse(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
