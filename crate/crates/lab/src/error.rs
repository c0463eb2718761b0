use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("infeasible model ({context})")]
    Infeasible { context: String },
    #[error(transparent)]
    Model(#[from] cmdp_psrl::Error),
}

impl LabError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| LabError::Io { path, source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> Self {
        let path = path.into();
        move |source| LabError::Json { path, source }
    }

    /// Process exit code: 1 for infeasible models, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Infeasible { .. } => 1,
            LabError::Model(cmdp_psrl::Error::Infeasible | cmdp_psrl::Error::TrueModelInfeasible) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
