use thiserror::Error;

use crate::metrics::TraceRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is rank deficient: sigma_min(AA^T) = {sigma_min:e}, sigma_max(AA^T) = {sigma_max:e}")]
    Singular { sigma_min: f64, sigma_max: f64 },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite iterate was produced. `trace` holds every record
    /// written before the failure.
    #[error("diverged at stage {stage}, iteration {iter}: non-finite {what}")]
    Diverged {
        stage: usize,
        iter: usize,
        what: &'static str,
        trace: Vec<TraceRecord>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            context,
            expected,
            got,
        });
    }
    Ok(())
}
