use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A required input file could not be opened or read.
    #[error("failed to load {}", path.display())]
    Load { path: PathBuf, source: io::Error },

    /// A file was readable but its contents are malformed.
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Input data violates a structural invariant (first offending record).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// NaN or infinite values appeared where finite values are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("edge ({0}, {1}) is not present in the graph")]
    MissingEdge(usize, usize),

    /// An iterative method hit its iteration cap.
    #[error("{message} (last residual {:.3e})", residual_history.last().copied().unwrap_or(f64::NAN))]
    Convergence {
        message: String,
        residual_history: Vec<f64>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    /// A pipeline phase failed.
    #[error("phase `{phase}` failed")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::Convergence { .. } => true,
            Error::Phase { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
