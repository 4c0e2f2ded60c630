use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid neighborhood kernel: {0}")]
    InvalidKernel(String),

    #[error("offset {0:?} is not in the lattice difference set")]
    OffsetOutOfDomain(Vec<i64>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample set is empty")]
    EmptySamples,

    #[error("value outside the unit cube: {0}")]
    OutOfUnitCube(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("infeasible separation: {0}")]
    InfeasibleSeparation(String),

    #[error("sampler configuration: {0}")]
    SamplerConfig(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error in {source_name}: {reason}")]
    Parse { source_name: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than by a failed computation
    /// or the environment. The CLI maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::InfeasibleSeparation(_) | Error::Fit(_) | Error::Io(_) | Error::Csv(_)
        )
    }
}
