use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("image too small: {0}")]
    TooSmall(String),
    #[error("missing reference image for sample {0}")]
    MissingReference(String),
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("empty partition: {0}")]
    EmptyPartition(String),
}
