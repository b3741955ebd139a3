use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter set or configuration violates a model invariant.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("meshing error: {0}")]
    Mesh(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    /// The linear solve failed or did not reach the residual target.
    #[error("solver error: {message} (relative residual {residual:e})")]
    Solver { message: String, residual: f64 },

    /// A sample evaluation failed inside an estimator.
    #[error("sample {sample_index} on level {level} failed: {source}")]
    Sample {
        level: usize,
        sample_index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by numerics rather than inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Solver { .. } => true,
            Error::Sample { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
