use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] svrg_admm::Error),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 1 configuration or input error, 2 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(svrg_admm::Error::Diverged { .. }) => 2,
            _ => 1,
        }
    }
}
