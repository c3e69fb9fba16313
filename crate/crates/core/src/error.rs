use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("integration diverged at t = {time} us")]
    Diverged { time: f64 },

    #[error("logical states are not orthonormal (overlap {0:.3e})")]
    NotOrthonormal(f64),

    #[error("re-orthogonalization collapsed: logical states became parallel")]
    Collapse,

    #[error("ambiguous branch labels in block {block}: max overlap {overlap:.3}; increase the detuning")]
    LabeledCrossing { block: usize, overlap: f64 },

    #[error("basis did not converge: level shift {shift_ghz:.3e} GHz after doubling")]
    NotConverged { shift_ghz: f64 },

    #[error("vanishing dressed matrix element for drive type {kind} at n = {n}")]
    VanishingMatrixElement { kind: u8, n: usize },

    #[error("non-finite gradient component {0}")]
    NonFiniteGradient(usize),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("record: {0}")]
    Record(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. }
                | Error::Collapse
                | Error::LabeledCrossing { .. }
                | Error::NotConverged { .. }
                | Error::NonFiniteGradient(_)
                | Error::Consistency(_)
        )
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
