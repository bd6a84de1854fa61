use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for a graph with {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model kind `{0}` is not differentiable")]
    UnsupportedModel(String),

    #[error("feature column {0} has an empty value pool")]
    EmptyPool(usize),

    #[error("exact enumeration needs {needed:.3e} configurations, budget is {budget}")]
    EnumerationBudget { needed: f64, budget: u64 },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error(
        "explanation incomplete: reached fidelity {:.4} < tau {:.4} after {} elements",
        .partial.fidelity, .tau, .partial.trace.len()
    )]
    ExplanationIncomplete {
        tau: f64,
        partial: Box<crate::zorro::ZorroExplanation>,
    },

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("unsupported file format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
